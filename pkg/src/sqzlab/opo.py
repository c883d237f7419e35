"""Closed-form physics of a sub-threshold degenerate OPO.

Everything in this module is a pure function of value-type inputs, in strict
SI units (watts, meters, radians per second).  Decibels and bench units
(mW, mm, MHz) belong to the I/O layer.

The central quantity is the quadrature variance of the OPO output relative
to shot noise,

    S(theta) = 1 + 4*a*r*x * [ cos^2(theta) / ((1 - x)^2 + 4*W^2)
                             - sin^2(theta) / ((1 + x)^2 + 4*W^2) ],

with ``a`` the detection efficiency, ``r`` the cavity escape efficiency,
``x`` the pump parameter and ``W`` the sideband frequency normalised by the
cavity decay rate.  theta = 0 is the anti-squeezed quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact


class ParameterDomainError(ValueError):
    """A physical parameter is outside its valid domain."""


class AboveThresholdError(ParameterDomainError):
    """Pump power at or above oscillation threshold; the below-threshold
    variance model does not apply there."""


def to_db(s_linear):
    """Linear variance (relative to shot noise) -> dB."""
    out = 10.0 * np.log10(s_linear)
    return float(out) if np.ndim(out) == 0 else out


def from_db(s_db):
    """dB (relative to shot noise) -> linear variance."""
    out = 10.0 ** (np.asarray(s_db) / 10.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class CavityParams:
    """Geometry and losses of the OPO cavity.

    round_trip_length     cavity round-trip length l in meters
    coupler_transmittance output-coupler transmittance T (fraction)
    intracavity_loss      residual intracavity loss L (fraction)
    nonlinear_efficiency  single-pass nonlinear conversion efficiency E_NL in 1/W
    """

    round_trip_length: float
    coupler_transmittance: float
    intracavity_loss: float
    nonlinear_efficiency: float

    def __post_init__(self):
        T, L = self.coupler_transmittance, self.intracavity_loss
        if not 0.0 < T < 1.0:
            raise ParameterDomainError(f"coupler_transmittance must be in (0, 1), got {T}")
        if not 0.0 <= L < 1.0:
            raise ParameterDomainError(f"intracavity_loss must be in [0, 1), got {L}")
        if not T + L < 1.0:
            raise ParameterDomainError(f"total loss T + L must be < 1, got {T + L}")
        if not self.round_trip_length > 0.0:
            raise ParameterDomainError(f"round_trip_length must be > 0, got {self.round_trip_length}")
        if not self.nonlinear_efficiency > 0.0:
            raise ParameterDomainError(f"nonlinear_efficiency must be > 0, got {self.nonlinear_efficiency}")


@dataclass(frozen=True)
class PumpSpec:
    """Pump drive, given as exactly one of:

    pump_power       pump power incident on the OPO, in watts
    parametric_gain  classical (intensity) parametric gain G >= 1
    pump_parameter   normalised pump amplitude x in [0, 1)

    The representation that was supplied is preserved (``kind``), because
    gain- and power-derived pump parameters need not agree for real data and
    downstream analysis treats them separately.
    """

    pump_power: float | None = None
    parametric_gain: float | None = None
    pump_parameter: float | None = None

    def __post_init__(self):
        given = [name for name in ("pump_power", "parametric_gain", "pump_parameter")
                 if getattr(self, name) is not None]
        if len(given) != 1:
            raise ParameterDomainError(
                f"exactly one of pump_power/parametric_gain/pump_parameter required, got {given or 'none'}")
        if self.pump_power is not None and not self.pump_power >= 0.0:
            raise ParameterDomainError(f"pump_power must be >= 0, got {self.pump_power}")
        if self.parametric_gain is not None and not self.parametric_gain >= 1.0:
            raise ParameterDomainError(f"parametric_gain must be >= 1, got {self.parametric_gain}")
        if self.pump_parameter is not None and not 0.0 <= self.pump_parameter < 1.0:
            raise ParameterDomainError(f"pump_parameter must be in [0, 1), got {self.pump_parameter}")

    @property
    def kind(self) -> str:
        if self.pump_power is not None:
            return "power"
        if self.parametric_gain is not None:
            return "gain"
        return "x"


@dataclass(frozen=True)
class SpectralPoint:
    """Sideband analysis point: angular frequency and its detuning parameter."""

    analysis_frequency: float  # rad/s
    detuning_parameter: float  # omega / gamma, dimensionless

    def __post_init__(self):
        if not self.analysis_frequency > 0.0:
            raise ParameterDomainError(f"analysis_frequency must be > 0, got {self.analysis_frequency}")
        if not self.detuning_parameter >= 0.0:
            raise ParameterDomainError(f"detuning_parameter must be >= 0, got {self.detuning_parameter}")


@dataclass(frozen=True)
class VarianceLevels:
    """Extremal quadrature variances relative to shot noise.

    s_min/s_max are linear; the *_db fields are 10*log10 of them.
    """

    s_min: float
    s_max: float
    s_min_db: float
    s_max_db: float

    @classmethod
    def from_linear(cls, s_min: float, s_max: float) -> "VarianceLevels":
        return cls(s_min=float(s_min), s_max=float(s_max),
                   s_min_db=to_db(s_min), s_max_db=to_db(s_max))

    @classmethod
    def from_db(cls, s_min_db: float, s_max_db: float) -> "VarianceLevels":
        return cls(s_min=from_db(s_min_db), s_max=from_db(s_max_db),
                   s_min_db=float(s_min_db), s_max_db=float(s_max_db))


def threshold_power(cavity: CavityParams) -> float:
    """Parametric oscillation threshold (T + L)^2 / (4 E_NL), in watts."""
    tl = cavity.coupler_transmittance + cavity.intracavity_loss
    return tl * tl / (4.0 * cavity.nonlinear_efficiency)


def escape_efficiency(cavity: CavityParams) -> float:
    """Fraction T / (T + L) of intracavity squeezing that leaves through the coupler."""
    tl = cavity.coupler_transmittance + cavity.intracavity_loss
    if tl == 0.0:
        raise ParameterDomainError("T + L must be > 0")
    return cavity.coupler_transmittance / tl


def cavity_decay_rate(cavity: CavityParams) -> float:
    """Cavity amplitude decay rate c (T + L) / l, in rad/s."""
    return SPEED_OF_LIGHT * (cavity.coupler_transmittance + cavity.intracavity_loss) / cavity.round_trip_length


def detuning_parameter(cavity: CavityParams, omega: float) -> float:
    """Normalised sideband frequency omega / gamma for angular frequency omega."""
    if not omega > 0.0:
        raise ParameterDomainError(f"analysis frequency must be > 0, got {omega}")
    return omega / cavity_decay_rate(cavity)


def spectral_point(cavity: CavityParams, frequency_hz: float) -> SpectralPoint:
    """Build a SpectralPoint from an analysis frequency in Hz (omega = 2*pi*f)."""
    omega = 2.0 * math.pi * frequency_hz
    return SpectralPoint(analysis_frequency=omega,
                         detuning_parameter=detuning_parameter(cavity, omega))


def pump_parameter(pump: PumpSpec, threshold: float | None = None) -> float:
    """Normalised pump amplitude x in [0, 1).

    Power variant:  x = sqrt(P_pump / P_th)   (threshold required)
    Gain variant:   x = 1 - 1 / sqrt(G)
    x variant:      identity

    Raises AboveThresholdError for P_pump >= P_th: the variance model is
    valid only below threshold.
    """
    if pump.kind == "power":
        if threshold is None or not threshold > 0.0:
            raise ParameterDomainError("power variant needs a positive threshold power")
        if pump.pump_power >= threshold:
            raise AboveThresholdError(
                f"pump power {pump.pump_power} W is at or above threshold {threshold} W")
        return math.sqrt(pump.pump_power / threshold)
    if pump.kind == "gain":
        return 1.0 - 1.0 / math.sqrt(pump.parametric_gain)
    return pump.pump_parameter


def gain_from_pump_parameter(x: float) -> float:
    """Classical parametric gain G = 1 / (1 - x)^2; inverse of the gain variant."""
    if not 0.0 <= x < 1.0:
        raise ParameterDomainError(f"pump parameter must be in [0, 1), got {x}")
    return 1.0 / (1.0 - x) ** 2


def quadrature_variance(theta, alpha: float, rho: float, x: float, omega_norm: float):
    """Quadrature variance S(theta) relative to shot noise.

    theta may be a scalar or array (radians).  alpha and rho are the
    detection and escape efficiencies in [0, 1], x the pump parameter in
    [0, 1), omega_norm the detuning parameter (>= 0).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ParameterDomainError(f"detection efficiency must be in [0, 1], got {alpha}")
    if not 0.0 <= rho <= 1.0:
        raise ParameterDomainError(f"escape efficiency must be in [0, 1], got {rho}")
    if not 0.0 <= x < 1.0:
        raise ParameterDomainError(f"pump parameter must be in [0, 1), got {x}")
    if not omega_norm >= 0.0:
        raise ParameterDomainError(f"detuning parameter must be >= 0, got {omega_norm}")
    theta = np.asarray(theta, dtype=float) if np.ndim(theta) else theta
    w2 = 4.0 * omega_norm * omega_norm
    c2 = np.cos(theta) ** 2
    lobe = c2 / ((1.0 - x) ** 2 + w2) - (1.0 - c2) / ((1.0 + x) ** 2 + w2)
    return 1.0 + 4.0 * alpha * rho * x * lobe


def min_max_levels(alpha: float, rho: float, x: float, omega_norm: float) -> VarianceLevels:
    """Extremal variances: s_max = S(0) (anti-squeezing), s_min = S(pi/2) (squeezing).

    Uses the cancellation-free rearrangement
        s_min = ((1-x)^2 + 4x(1 - a*r) + 4 W^2) / ((1+x)^2 + 4 W^2),
    which keeps s_min accurate (and s_min*s_max = 1 at unit efficiency, zero
    detuning) even for x close to 1, where the direct 1 - 4arx/D form loses
    most of its significant digits.
    """
    quadrature_variance(0.0, alpha, rho, x, omega_norm)  # validate the domain
    w2 = 4.0 * omega_norm * omega_norm
    ar = alpha * rho
    s_max = ((1.0 - x) ** 2 + w2 + 4.0 * ar * x) / ((1.0 - x) ** 2 + w2)
    s_min = ((1.0 - x) ** 2 + 4.0 * x * (1.0 - ar) + w2) / ((1.0 + x) ** 2 + w2)
    return VarianceLevels.from_linear(s_min=s_min, s_max=s_max)
