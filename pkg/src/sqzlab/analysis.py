"""Prediction pipeline, pump sweeps, and model-data reconciliation.

``predict_levels`` composes the cavity and detection operations into the
squeezing/anti-squeezing prediction for a given pump drive and analysis
frequency.  ``reconcile_discrepancy`` solves the inverse problem posed by a
measurement that disagrees with that prediction: find a multiplicative
correction to the measured parametric gain together with an extra unknown
efficiency factor such that the corrected prediction matches the measured
level pair.  ``loss_only_explanation_check`` asks the narrower question of
whether extra loss alone can do the job.

Measured levels are dB re the measured shot noise, so all comparisons here
are made between measured values and circuit-noise-mapped predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detection import DetectionChain, apply_circuit_noise, detection_efficiency
from .opo import (
    AboveThresholdError,
    CavityParams,
    ParameterDomainError,
    PumpSpec,
    VarianceLevels,
    escape_efficiency,
    gain_from_pump_parameter,
    min_max_levels,
    pump_parameter,
    spectral_point,
    threshold_power,
)

GAIN_SCALE_BOX = (0.5, 1.5)
EFFICIENCY_SCALE_BOX = (0.3, 1.0)


def predict_levels(cavity: CavityParams, chain: DetectionChain, pump: PumpSpec,
                   frequency_hz: float, include_circuit_noise: bool = False) -> VarianceLevels:
    """Predicted squeezing/anti-squeezing levels at the given analysis frequency.

    With ``include_circuit_noise`` the returned levels are what the analyzer
    would display relative to the measured shot noise (electronic floor in
    both signal and reference).
    """
    alpha = detection_efficiency(chain)
    rho = escape_efficiency(cavity)
    x = pump_parameter(pump, threshold_power(cavity))
    omega_norm = spectral_point(cavity, frequency_hz).detuning_parameter
    levels = min_max_levels(alpha, rho, x, omega_norm)
    if not include_circuit_noise:
        return levels
    clearance = chain.circuit_noise_clearance_db
    lo = float(apply_circuit_noise(levels.s_min, clearance))
    hi = float(apply_circuit_noise(levels.s_max, clearance))
    return VarianceLevels.from_db(lo, hi)


@dataclass(frozen=True)
class SweepRow:
    """One pump point of a sweep: the supplied drive, its derived counterpart,
    and the predicted (and optionally measured) levels."""

    pump_power: float                      # W (primary or derived)
    parametric_gain: float | None          # None when above threshold
    pump_parameter: float | None
    predicted: VarianceLevels | None       # None when above threshold
    measured: VarianceLevels | None = None
    primary: str = "gain"                  # which representation was supplied
    valid: bool = True


def sweep_pump(cavity: CavityParams, chain: DetectionChain, pumps: list[PumpSpec],
               frequency_hz: float,
               measured: list[tuple[float, VarianceLevels]] | None = None) -> list[SweepRow]:
    """Predicted levels for a list of pump drives, ordered by pump power.

    Above-threshold entries are kept in the table and marked invalid rather
    than dropped.  Measured level pairs, given as (pump_power_W, levels),
    attach to the row with the nearest pump power.
    """
    if not pumps:
        raise ParameterDomainError("pump list must not be empty")
    p_th = threshold_power(cavity)
    rows = []
    for pump in pumps:
        try:
            x = pump_parameter(pump, p_th)
        except AboveThresholdError:
            rows.append(SweepRow(pump_power=pump.pump_power, parametric_gain=None,
                                 pump_parameter=None, predicted=None,
                                 primary=pump.kind, valid=False))
            continue
        power = pump.pump_power if pump.kind == "power" else x * x * p_th
        gain = pump.parametric_gain if pump.kind == "gain" else gain_from_pump_parameter(x)
        levels = predict_levels(cavity, chain, pump, frequency_hz)
        rows.append(SweepRow(pump_power=power, parametric_gain=gain, pump_parameter=x,
                             predicted=levels, primary=pump.kind))
    rows.sort(key=lambda r: r.pump_power)
    if measured:
        powers = np.array([r.pump_power for r in rows])
        assigned: dict[int, VarianceLevels] = {}
        for m_power, m_levels in measured:
            assigned[int(np.argmin(np.abs(powers - m_power)))] = m_levels
        rows = [
            SweepRow(pump_power=r.pump_power, parametric_gain=r.parametric_gain,
                     pump_parameter=r.pump_parameter, predicted=r.predicted,
                     measured=assigned.get(i), primary=r.primary, valid=r.valid)
            for i, r in enumerate(rows)
        ]
    return rows


@dataclass(frozen=True)
class ReconcileResult:
    """Gain/efficiency corrections explaining a measured level pair.

    gain_scale multiplies the nominal parametric gain G; efficiency_scale
    multiplies the nominal detection efficiency.  amplitude_gain_scale is
    the same correction expressed on sqrt(G), the amplitude gain, since a
    fractional correction reads very differently on the two scales.
    residual_db is the remaining 2-norm misfit of the level pair.
    """

    gain_scale: float
    efficiency_scale: float
    residual_db: float
    amplitude_gain_scale: float
    corrected_gain: float
    iterations: int
    exact_match: bool


def _scaled_prediction_db(gain_scale: float, efficiency_scale: float, nominal_gain: float,
                          alpha: float, rho: float, omega_norm: float,
                          clearance_db: float) -> np.ndarray:
    scaled_gain = max(gain_scale * nominal_gain, 1.0)
    x = 1.0 - 1.0 / math.sqrt(scaled_gain)
    levels = min_max_levels(min(efficiency_scale * alpha, 1.0), rho, x, omega_norm)
    return np.array([
        float(apply_circuit_noise(levels.s_min, clearance_db)),
        float(apply_circuit_noise(levels.s_max, clearance_db)),
    ])


def reconcile_discrepancy(measured: VarianceLevels, cavity: CavityParams,
                          chain: DetectionChain, pump: PumpSpec, frequency_hz: float,
                          tol: float = 1e-10, max_iterations: int = 200) -> ReconcileResult:
    """Find (gain_scale, efficiency_scale) whose corrected prediction matches
    the measured levels.

    Solves the 2x2 system F(g, e) = predicted(g, e) - measured = 0 by a
    damped Newton iteration (finite-difference Jacobian, step halving),
    constrained to g in (0.5, 1.5) and e in (0.3, 1].  If no root exists in
    the box the boundary least-squares point is returned with its nonzero
    residual and ``exact_match=False``.
    """
    if pump.kind != "gain":
        raise ParameterDomainError(
            "reconciliation corrects a measured parametric gain; supply the pump as a gain")
    gain = pump.parametric_gain
    alpha = detection_efficiency(chain)
    rho = escape_efficiency(cavity)
    omega_norm = spectral_point(cavity, frequency_hz).detuning_parameter
    clearance = chain.circuit_noise_clearance_db
    target = np.array([measured.s_min_db, measured.s_max_db])

    g_lo, g_hi = GAIN_SCALE_BOX
    e_lo, e_hi = EFFICIENCY_SCALE_BOX
    eps = 1e-7

    def clip(v):
        return np.array([min(max(v[0], g_lo + eps), g_hi - eps),
                         min(max(v[1], e_lo + eps), e_hi)])

    def residual(v):
        return _scaled_prediction_db(v[0], v[1], gain, alpha, rho, omega_norm, clearance) - target

    v = np.array([1.0, 0.9])
    r = residual(v)
    norm = float(np.linalg.norm(r))
    it = 0
    for it in range(1, max_iterations + 1):
        if norm < tol:
            break
        jac = np.empty((2, 2))
        for j in range(2):
            dv = np.zeros(2)
            dv[j] = eps
            v_pert = clip(v + dv)
            if v_pert[j] == v[j]:  # at the upper box edge: difference backwards
                v_pert = clip(v - dv)
            jac[:, j] = (residual(v_pert) - r) / (v_pert[j] - v[j])
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        # damped: halve until the residual norm decreases
        improved = False
        for _ in range(40):
            v_new = clip(v + step)
            r_new = residual(v_new)
            norm_new = float(np.linalg.norm(r_new))
            if norm_new < norm:
                v, r, norm = v_new, r_new, norm_new
                improved = True
                break
            step = 0.5 * step
        if not improved:
            break
    g, e = float(v[0]), float(v[1])
    return ReconcileResult(
        gain_scale=g,
        efficiency_scale=e,
        residual_db=norm,
        amplitude_gain_scale=math.sqrt(g),
        corrected_gain=g * gain,
        iterations=it,
        exact_match=norm < 1e-6,
    )


@dataclass(frozen=True)
class LossOnlyReport:
    """Can extra loss alone explain a measured level pair?

    efficiency_scale matches the measured squeezing level exactly; the
    anti-squeezing misfit that remains decides feasibility.
    """

    efficiency_scale: float
    s_max_predicted_db: float
    s_max_error_db: float
    feasible: bool
    tolerance_db: float


def loss_only_explanation_check(measured: VarianceLevels, cavity: CavityParams,
                                chain: DetectionChain, pump: PumpSpec, frequency_hz: float,
                                tolerance_db: float = 0.1) -> LossOnlyReport:
    """Fit a single efficiency scale to the measured squeezing level and report
    the resulting anti-squeezing error.

    The squeezing level pins the efficiency scale in closed form: with
    S_min = 1 - 4*a*r*x / D and the measured S_min recovered from the
    circuit-noise map, e = (1 - S_min_meas) * D / (4*a*r*x).  Feasible means
    the implied anti-squeezing agrees within ``tolerance_db``.
    """
    alpha = detection_efficiency(chain)
    rho = escape_efficiency(cavity)
    x = pump_parameter(pump, threshold_power(cavity))
    omega_norm = spectral_point(cavity, frequency_hz).detuning_parameter
    clearance = chain.circuit_noise_clearance_db

    floor = chain.circuit_noise_floor
    s_min_underlying = measured.s_min * (1.0 + floor) - floor
    if not 0.0 < s_min_underlying < 1.0:
        raise ParameterDomainError("measured squeezing level must lie between the electronic floor and shot noise")
    d_minus = (1.0 + x) ** 2 + 4.0 * omega_norm ** 2
    e = (1.0 - s_min_underlying) * d_minus / (4.0 * alpha * rho * x)
    e = min(e, 1.0)  # efficiency cannot exceed the nominal chain
    levels = min_max_levels(e * alpha, rho, x, omega_norm)
    s_max_pred_db = float(apply_circuit_noise(levels.s_max, clearance))
    err = s_max_pred_db - measured.s_max_db
    return LossOnlyReport(
        efficiency_scale=float(e),
        s_max_predicted_db=s_max_pred_db,
        s_max_error_db=float(err),
        feasible=abs(err) <= tolerance_db,
        tolerance_db=tolerance_db,
    )
