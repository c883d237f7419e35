"""Squeezed-vacuum OPO modelling, homodyne trace emulation, and trace fitting."""

from .opo import (
    SPEED_OF_LIGHT,
    AboveThresholdError,
    CavityParams,
    ParameterDomainError,
    PumpSpec,
    SpectralPoint,
    VarianceLevels,
    cavity_decay_rate,
    detuning_parameter,
    escape_efficiency,
    from_db,
    gain_from_pump_parameter,
    min_max_levels,
    pump_parameter,
    quadrature_variance,
    spectral_point,
    threshold_power,
    to_db,
)
from .detection import (
    AcquisitionSettings,
    DetectionChain,
    NoiseTrace,
    PhaseScan,
    apply_circuit_noise,
    detection_efficiency,
    jitter_averaged_variance,
    remove_circuit_noise,
    synthesize_shot_reference,
    synthesize_trace,
)
from .fitting import (
    FitModel,
    FitOptions,
    FitResult,
    extrema_levels,
    fit_trace,
    initial_guess,
)
from .analysis import (
    LossOnlyReport,
    ReconcileResult,
    SweepRow,
    loss_only_explanation_check,
    predict_levels,
    reconcile_discrepancy,
    sweep_pump,
)
from .config import ConfigError, ExperimentConfig, format_config, load_config, parse_config
from .traceio import TraceFormatError, load_trace, parse_trace, save_trace, serialize_trace

__version__ = "0.1.0"

__all__ = [
    "SPEED_OF_LIGHT",
    "AboveThresholdError",
    "AcquisitionSettings",
    "CavityParams",
    "ConfigError",
    "DetectionChain",
    "ExperimentConfig",
    "FitModel",
    "FitOptions",
    "FitResult",
    "LossOnlyReport",
    "NoiseTrace",
    "ParameterDomainError",
    "PhaseScan",
    "PumpSpec",
    "ReconcileResult",
    "SpectralPoint",
    "SweepRow",
    "TraceFormatError",
    "VarianceLevels",
    "apply_circuit_noise",
    "cavity_decay_rate",
    "detection_efficiency",
    "detuning_parameter",
    "escape_efficiency",
    "extrema_levels",
    "fit_trace",
    "format_config",
    "from_db",
    "gain_from_pump_parameter",
    "initial_guess",
    "jitter_averaged_variance",
    "load_config",
    "load_trace",
    "loss_only_explanation_check",
    "min_max_levels",
    "parse_config",
    "parse_trace",
    "predict_levels",
    "pump_parameter",
    "quadrature_variance",
    "reconcile_discrepancy",
    "remove_circuit_noise",
    "save_trace",
    "serialize_trace",
    "spectral_point",
    "sweep_pump",
    "synthesize_shot_reference",
    "synthesize_trace",
    "threshold_power",
    "to_db",
]
