"""Least-squares fitting of scanned-phase noise traces.

The physical parameters of the variance formula (efficiencies and pump
parameter) are not individually identifiable from a single trace: the trace
determines only the two extremal levels, the phase offset and the scan rate.
The fit therefore works in the reparameterised space

    p = (s_min_db, s_max_db, theta0, scan_rate)

and maps back to the variance curve through S(theta) = A + B*cos(2*theta)
with A = (s_max + s_min)/2 and B = (s_max - s_min)/2.  Residuals are taken
in dB space, where the analyzer's estimator scatter is close to
homoscedastic.

When the acquisition is known to carry LO phase jitter of RMS sigma, the
model mean is the Gauss-Hermite average of the dB curve over the jitter
distribution, which keeps the fitted levels unbiased estimates of the
underlying jitter-free levels.  A free jitter width would be structurally
non-identifiable here: averaging only shrinks B by exp(-2*sigma^2), which a
rescaled (s_min, s_max) pair reproduces exactly, so jitter enters the model
as a fixed, known value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .detection import DEFAULT_GH_NODES, NoiseTrace, _gh_nodes
from .opo import ParameterDomainError, VarianceLevels, from_db

_LN10_OVER_10 = math.log(10.0) / 10.0
_N_FREE = 4


@dataclass(frozen=True)
class FitModel:
    """Scanned-phase fit model: free level/phase parameters plus fixed context.

    s_min_db, s_max_db  extremal underlying variances, dB re shot noise (free)
    theta0              LO phase at t = 0, radians (free)
    scan_rate           LO phase scan rate, rad/s (free)
    omega_norm          detuning parameter, fixed (kept for back-mapping to
                        pump parameter, not used by the trace model itself)
    clearance_db        circuit-noise clearance, fixed
    jitter_sigma        known RMS LO phase jitter, fixed (0 = no averaging)
    gh_nodes            Gauss-Hermite nodes for the jitter average
    """

    s_min_db: float
    s_max_db: float
    theta0: float
    scan_rate: float
    omega_norm: float = 0.0
    clearance_db: float = 14.0
    jitter_sigma: float = 0.0
    gh_nodes: int = DEFAULT_GH_NODES


@dataclass(frozen=True)
class FitOptions:
    max_iterations: int = 200
    ftol: float = 1e-12     # relative SSR decrease considered converged
    xtol: float = 1e-10     # max parameter step considered converged
    lambda0: float = 1e-3   # initial LM damping


@dataclass(frozen=True)
class FitResult:
    model: FitModel                 # fitted parameter values
    covariance: np.ndarray          # 4x4 over (s_min_db, s_max_db, theta0, rate)
    parameter_sigmas: np.ndarray    # sqrt of the covariance diagonal
    levels: VarianceLevels
    s_min_sigma_db: float
    s_max_sigma_db: float
    residual_rms_db: float
    iterations: int
    converged: bool
    phase_identifiable: bool
    objective_history: np.ndarray   # SSR after each accepted step


def _model_db(p: np.ndarray, t: np.ndarray, floor: float, jitter: float, nodes: int) -> np.ndarray:
    s_min = 10.0 ** (p[0] / 10.0)
    s_max = 10.0 ** (p[1] / 10.0)
    a = 0.5 * (s_max + s_min)
    b = 0.5 * (s_max - s_min)
    theta = p[2] + p[3] * t
    if jitter > 0.0:
        u, w = _gh_nodes(nodes)
        s = a + b * np.cos(2.0 * (theta[:, None] + math.sqrt(2.0) * jitter * u[None, :]))
        return (10.0 * np.log10((s + floor) / (1.0 + floor))) @ w
    s = a + b * np.cos(2.0 * theta)
    return 10.0 * np.log10((s + floor) / (1.0 + floor))


def _jacobian(p: np.ndarray, t: np.ndarray, floor: float, jitter: float, nodes: int) -> np.ndarray:
    s_min = 10.0 ** (p[0] / 10.0)
    s_max = 10.0 ** (p[1] / 10.0)
    a = 0.5 * (s_max + s_min)
    b = 0.5 * (s_max - s_min)
    theta = p[2] + p[3] * t
    if jitter > 0.0:
        u, w = _gh_nodes(nodes)
        ph = 2.0 * (theta[:, None] + math.sqrt(2.0) * jitter * u[None, :])
    else:
        ph = 2.0 * theta[:, None]
        w = np.ones(1)
    c = np.cos(ph)
    s = a + b * c
    inv = 1.0 / (s + floor)
    jac = np.empty((t.size, _N_FREE))
    jac[:, 0] = (0.5 * s_min * (1.0 - c) * inv) @ w
    jac[:, 1] = (0.5 * s_max * (1.0 + c) * inv) @ w
    dtheta = (-2.0 * b * np.sin(ph) * inv) @ w / _LN10_OVER_10
    jac[:, 2] = dtheta
    jac[:, 3] = dtheta * t
    return jac


def _lm_minimize(p0, t, y, floor, jitter, nodes, opts: FitOptions):
    """Damped Gauss-Newton (Levenberg-Marquardt); SSR never increases across
    accepted steps.  Returns (p, ssr, history, iterations, converged)."""
    p = np.asarray(p0, dtype=float).copy()
    lam = opts.lambda0
    r = _model_db(p, t, floor, jitter, nodes) - y
    ssr = float(r @ r)
    history = [ssr]
    converged = False
    it = 0
    for it in range(1, opts.max_iterations + 1):
        jac = _jacobian(p, t, floor, jitter, nodes)
        grad = jac.T @ r
        hess = jac.T @ jac
        diag = np.diag(np.maximum(np.diag(hess), 1e-14))
        accepted = False
        step = None
        for _ in range(60):
            try:
                step = np.linalg.solve(hess + lam * diag, -grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(hess + lam * diag, -grad, rcond=None)[0]
            p_new = p + step
            r_new = _model_db(p_new, t, floor, jitter, nodes) - y
            ssr_new = float(r_new @ r_new)
            if ssr_new < ssr:
                accepted = True
                break
            lam *= 4.0
        if not accepted:
            converged = True  # no descent direction left at this damping range
            break
        rel_drop = (ssr - ssr_new) / max(ssr, 1e-300)
        p, r, ssr = p_new, r_new, ssr_new
        history.append(ssr)
        lam = max(lam / 3.0, 1e-14)
        if rel_drop < opts.ftol or float(np.max(np.abs(step))) < opts.xtol:
            converged = True
            break
    return p, ssr, np.asarray(history), it, converged


def _normalize(p: np.ndarray, cov: np.ndarray):
    """Canonical parameter form: s_min <= s_max, scan_rate > 0, theta0 in [0, pi)."""
    p = p.copy()
    cov = cov.copy()
    if p[0] > p[1]:
        p[[0, 1]] = p[[1, 0]]
        p[2] += math.pi / 2.0
        cov[[0, 1]] = cov[[1, 0]]
        cov[:, [0, 1]] = cov[:, [1, 0]]
    if p[3] < 0.0:
        p[3] = -p[3]
        p[2] = -p[2]
        cov[2:, :2] = -cov[2:, :2]
        cov[:2, 2:] = -cov[:2, 2:]
    p[2] = p[2] % math.pi
    return p, cov


def initial_guess(trace: NoiseTrace, clearance_db: float, omega_norm: float = 0.0,
                  jitter_sigma: float = 0.0, scan_rate: float | None = None,
                  gh_nodes: int = DEFAULT_GH_NODES) -> FitModel:
    """Build a starting FitModel from trace percentiles and a coarse phase scan."""
    y = trace.powers_db
    floor = 10.0 ** (-clearance_db / 10.0)
    lo_obs, hi_obs = np.percentile(y, [2.0, 98.0])
    # invert the circuit map; clamp to keep a usable guess for extreme traces
    lo = max(from_db(lo_obs) * (1.0 + floor) - floor, 1e-4)
    hi = max(from_db(hi_obs) * (1.0 + floor) - floor, lo * 1.0001)
    if jitter_sigma > 0.0:
        shrink = math.exp(-2.0 * jitter_sigma * jitter_sigma)
        a, b = 0.5 * (hi + lo), 0.5 * (hi - lo) / shrink
        lo, hi = max(a - b, lo * 0.05), a + b
    rate = scan_rate if scan_rate is not None else trace.acquisition.lo_scan.rate
    p = np.array([10.0 * math.log10(lo), 10.0 * math.log10(hi), 0.0, rate])
    best_theta0, best_ssr = 0.0, math.inf
    for k in range(24):
        p[2] = k * math.pi / 24.0
        r = _model_db(p, trace.times, floor, jitter_sigma, gh_nodes) - y
        ssr = float(r @ r)
        if ssr < best_ssr:
            best_theta0, best_ssr = p[2], ssr
    return FitModel(s_min_db=p[0], s_max_db=p[1], theta0=best_theta0, scan_rate=rate,
                    omega_norm=omega_norm, clearance_db=clearance_db,
                    jitter_sigma=jitter_sigma, gh_nodes=gh_nodes)


def fit_trace(trace: NoiseTrace, model: FitModel | None = None,
              options: FitOptions | None = None) -> FitResult:
    """Fit the scanned-phase model to a noise trace.

    ``model`` supplies the initial guess and the fixed context (clearance,
    detuning, known jitter); if omitted, a guess is built from the trace.
    Non-convergence within the iteration cap returns the best-so-far values
    with ``converged=False``.  A trace without usable phase modulation is
    flagged ``phase_identifiable=False`` and the phase uncertainty is
    reported as the full model period (pi).
    """
    if len(trace) < 10 * _N_FREE:
        raise ParameterDomainError(
            f"need at least {10 * _N_FREE} samples to fit {_N_FREE} parameters, got {len(trace)}")
    opts = options or FitOptions()
    if model is None:
        model = initial_guess(trace, clearance_db=trace.metadata.get("clearance_db", 14.0))
    floor = 10.0 ** (-model.clearance_db / 10.0)
    t, y = trace.times, trace.powers_db
    p0 = np.array([model.s_min_db, model.s_max_db, model.theta0, model.scan_rate])
    p, ssr, history, iterations, converged = _lm_minimize(
        p0, t, y, floor, model.jitter_sigma, model.gh_nodes, opts)

    jac = _jacobian(p, t, floor, model.jitter_sigma, model.gh_nodes)
    sv = np.linalg.svd(jac, compute_uv=False)
    full_rank = sv[-1] > 1e-8 * sv[0]
    dof = max(len(trace) - _N_FREE, 1)
    scale = ssr / dof
    hess = jac.T @ jac
    if full_rank:
        cov = scale * np.linalg.inv(hess)
    else:
        cov = scale * np.linalg.pinv(hess)
    p, cov = _normalize(p, cov)
    sigmas = np.sqrt(np.maximum(np.diag(cov), 0.0))
    # the phase is meaningful only if the modulation amplitude is established
    # well beyond its own uncertainty; a flat trace fits a small noise ripple
    modulation = p[1] - p[0]
    significant = modulation > 4.0 * math.hypot(sigmas[0], sigmas[1])
    identifiable = full_rank and significant
    if not identifiable:
        sigmas[2] = math.pi  # phase unconstrained: report the full period

    fitted = replace(model, s_min_db=float(p[0]), s_max_db=float(p[1]),
                     theta0=float(p[2]), scan_rate=float(p[3]))
    levels = VarianceLevels.from_db(fitted.s_min_db, fitted.s_max_db)
    return FitResult(
        model=fitted,
        covariance=cov,
        parameter_sigmas=sigmas,
        levels=levels,
        s_min_sigma_db=float(sigmas[0]),
        s_max_sigma_db=float(sigmas[1]),
        residual_rms_db=math.sqrt(ssr / len(trace)),
        iterations=iterations,
        converged=converged,
        phase_identifiable=bool(identifiable),
        objective_history=history,
    )


def extrema_levels(trace: NoiseTrace, clearance_db: float,
                   jitter_sigma: float = 0.0) -> VarianceLevels:
    """Cross-check mode: extract levels from trace percentiles alone, without
    the scan-model fit.  Coarser than fit_trace; useful as a sanity check."""
    guess = initial_guess(trace, clearance_db=clearance_db, jitter_sigma=jitter_sigma)
    return VarianceLevels.from_db(guess.s_min_db, guess.s_max_db)
