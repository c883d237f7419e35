"""Homodyne detection chain and scanned-phase trace synthesis.

Models the path from the OPO output to a number on the spectrum analyzer:
detection efficiency, the electronic (circuit) noise floor, local-oscillator
phase jitter, and the power-estimator scatter of an analyzer running in
zero-span mode.

Conventions:

* Relative noise powers are dB re the *measured* shot noise.  Both the
  signal trace and the shot-noise reference contain the same additive
  electronic floor n = 10^(-clearance/10), so the reported level for an
  underlying variance S is 10*log10((S + n) / (1 + n)).
* The LO phase scan is a linear ramp theta(t) = theta0 + 2*pi*t/T_scan.
* Phase jitter is zero-mean Gaussian and quasi-static within one analyzer
  sample.
* Analyzer scatter per sample is a normalised chi-square with
  k = max(2, round(2*RBW/VBW)) degrees of freedom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermite

from .opo import ParameterDomainError, quadrature_variance

DEFAULT_GH_NODES = 21


@dataclass(frozen=True)
class DetectionChain:
    """Efficiencies of the homodyne detection path.

    quantum_efficiency      photodiode quantum efficiency eta, in (0, 1]
    visibility              homodyne fringe visibility xi, in (0, 1]
    propagation_efficiency  extra intensity transmission between OPO and
                            detector (default 1; a knob for loss studies)
    circuit_noise_clearance_db  electronic noise floor, dB below shot noise
    """

    quantum_efficiency: float
    visibility: float
    propagation_efficiency: float = 1.0
    circuit_noise_clearance_db: float = 14.0

    def __post_init__(self):
        for name in ("quantum_efficiency", "visibility", "propagation_efficiency"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ParameterDomainError(f"{name} must be in (0, 1], got {v}")
        if not self.circuit_noise_clearance_db > 0.0:
            raise ParameterDomainError(
                f"circuit_noise_clearance_db must be > 0, got {self.circuit_noise_clearance_db}")

    @property
    def circuit_noise_floor(self) -> float:
        """Electronic floor as a linear variance relative to shot noise."""
        return 10.0 ** (-self.circuit_noise_clearance_db / 10.0)


@dataclass(frozen=True)
class PhaseScan:
    """Linear LO phase ramp theta(t) = theta0 + 2*pi*t/period, with optional
    per-sample Gaussian phase jitter (RMS jitter_sigma, radians)."""

    period: float
    theta0: float = 0.0
    jitter_sigma: float = 0.0

    def __post_init__(self):
        if not self.period > 0.0:
            raise ParameterDomainError(f"scan period must be > 0, got {self.period}")
        if not self.jitter_sigma >= 0.0:
            raise ParameterDomainError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")

    @property
    def rate(self) -> float:
        """Phase scan rate, rad/s."""
        return 2.0 * math.pi / self.period

    def phase(self, t):
        return self.theta0 + self.rate * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class AcquisitionSettings:
    """Spectrum-analyzer settings for a zero-span measurement."""

    center_frequency: float       # Hz
    resolution_bandwidth: float   # Hz
    video_bandwidth: float        # Hz
    sweep_duration: float         # s
    sample_count: int
    lo_scan: PhaseScan

    def __post_init__(self):
        for name in ("center_frequency", "resolution_bandwidth", "video_bandwidth", "sweep_duration"):
            if not getattr(self, name) > 0.0:
                raise ParameterDomainError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.video_bandwidth <= self.resolution_bandwidth:
            raise ParameterDomainError("video_bandwidth must not exceed resolution_bandwidth")
        if not self.sample_count >= 2:
            raise ParameterDomainError(f"sample_count must be >= 2, got {self.sample_count}")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.sweep_duration, self.sample_count)

    @property
    def estimator_dof(self) -> int:
        """Chi-square degrees of freedom of one power sample: RBW-band power
        detection followed by VBW averaging."""
        return max(2, round(2.0 * self.resolution_bandwidth / self.video_bandwidth))


@dataclass(frozen=True, eq=False)
class NoiseTrace:
    """A scanned-phase noise-power record relative to shot noise."""

    times: np.ndarray              # s, strictly increasing
    powers_db: np.ndarray          # dB re measured shot noise
    acquisition: AcquisitionSettings
    shot_reference_db: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.powers_db, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "powers_db", p)
        if t.shape != p.shape or t.ndim != 1:
            raise ParameterDomainError("times and powers_db must be 1-D arrays of equal length")
        if t.size >= 2 and not np.all(np.diff(t) > 0.0):
            raise ParameterDomainError("sample times must be strictly increasing")
        if not np.all(np.isfinite(p)):
            raise ParameterDomainError("power values must be finite")

    def __len__(self) -> int:
        return int(self.times.size)


def detection_efficiency(chain: DetectionChain) -> float:
    """Total detection efficiency eta * xi^2 * propagation_efficiency."""
    return (chain.quantum_efficiency * chain.visibility ** 2
            * chain.propagation_efficiency)


def apply_circuit_noise(s_linear, clearance_db: float):
    """Observed level, dB re measured shot noise, of an underlying variance.

    Both the signal and the shot-noise reference acquire the same additive
    electronic floor n = 10^(-clearance/10); the observable is therefore
    10*log10((s + n) / (1 + n)).
    """
    if not clearance_db > 0.0:
        raise ParameterDomainError(f"clearance must be > 0 dB, got {clearance_db}")
    s = np.asarray(s_linear, dtype=float) if np.ndim(s_linear) else s_linear
    if not np.all(np.asarray(s) > 0.0):
        raise ParameterDomainError("variance must be > 0")
    n = 10.0 ** (-clearance_db / 10.0)
    return 10.0 * np.log10((s + n) / (1.0 + n))


def remove_circuit_noise(observed_db, clearance_db: float):
    """Underlying linear variance from an observed level; inverse of
    apply_circuit_noise.  Values below the floor raise."""
    n = 10.0 ** (-clearance_db / 10.0)
    s = 10.0 ** (np.asarray(observed_db, dtype=float) / 10.0) * (1.0 + n) - n
    if not np.all(s > 0.0):
        raise ParameterDomainError("observed level lies at or below the electronic floor")
    return s if np.ndim(observed_db) else float(s)


@lru_cache(maxsize=32)
def _gh_nodes(n: int):
    nodes, weights = roots_hermite(n)
    return nodes, weights / math.sqrt(math.pi)


def _gh_node_count(sigma: float, nodes: int) -> int:
    # Gauss-Hermite needs roughly (b/2)^2 nodes to resolve cos(b*u) with
    # b = 2*sqrt(2)*sigma; below sigma = 0.5 the configured count suffices.
    if sigma <= 0.5:
        return nodes
    return max(nodes, int(math.ceil(4.0 * sigma * sigma)) + 40)


def jitter_averaged_variance(theta0: float, sigma: float, alpha: float, rho: float,
                             x: float, omega_norm: float,
                             nodes: int = DEFAULT_GH_NODES) -> float:
    """Expected variance E[S(theta0 + d)] over LO phase jitter d ~ N(0, sigma^2).

    Computed by Gauss-Hermite quadrature in the linear variance domain; the
    node count is raised automatically when sigma is large enough that the
    configured count cannot resolve the oscillatory integrand.  sigma = 0
    returns the jitter-free variance exactly.
    """
    if not sigma >= 0.0:
        raise ParameterDomainError(f"jitter sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        return float(quadrature_variance(theta0, alpha, rho, x, omega_norm))
    u, w = _gh_nodes(_gh_node_count(sigma, nodes))
    thetas = theta0 + math.sqrt(2.0) * sigma * u
    return float(quadrature_variance(thetas, alpha, rho, x, omega_norm) @ w)


def synthesize_trace(alpha: float, rho: float, x: float, omega_norm: float,
                     chain: DetectionChain, acq: AcquisitionSettings,
                     rng_seed: int) -> NoiseTrace:
    """Emulate one zero-span analyzer sweep of the scanned-phase noise power.

    Per sample: the LO phase is the scan ramp plus (optionally) one Gaussian
    jitter draw; the mean observed power is the variance at that phase pushed
    through the circuit-noise map; the recorded power is that mean times a
    normalised chi-square estimator factor.  Bit-identical for a fixed seed.
    """
    rng = np.random.default_rng(rng_seed)
    t = acq.times
    theta = acq.lo_scan.phase(t)
    if acq.lo_scan.jitter_sigma > 0.0:
        theta = theta + rng.normal(0.0, acq.lo_scan.jitter_sigma, size=t.size)
    s = quadrature_variance(theta, alpha, rho, x, omega_norm)
    n = chain.circuit_noise_floor
    mean_power = (s + n) / (1.0 + n)
    k = acq.estimator_dof
    factors = rng.chisquare(k, size=t.size) / k
    powers_db = 10.0 * np.log10(mean_power * factors)
    meta = {
        "alpha": alpha, "rho": rho, "x": x, "omega_norm": omega_norm,
        "clearance_db": chain.circuit_noise_clearance_db, "seed": rng_seed,
    }
    return NoiseTrace(times=t, powers_db=powers_db, acquisition=acq,
                      shot_reference_db=0.0, metadata=meta)


def synthesize_shot_reference(acq: AcquisitionSettings, chain: DetectionChain,
                              rng_seed: int) -> NoiseTrace:
    """Shot-noise reference sweep: the same generator with the OPO blocked (x = 0)."""
    return synthesize_trace(detection_efficiency(chain), 1.0, 0.0, 0.0, chain, acq, rng_seed)
