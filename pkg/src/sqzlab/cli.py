"""Command-line front end.

Subcommands::

    sqzlab predict   --config cfg [--circuit-noise]          model predictions
    sqzlab synth     --config cfg --seed N --out trace.csv   synthesize a trace
    sqzlab fit       --trace t.csv --config cfg              fit a trace
    sqzlab sweep     --config cfg --gains ... | --powers ... pump sweep table
    sqzlab reconcile --config cfg --measured smin,smax       discrepancy solve

Exit codes: 0 success, 1 usage/parse error, 2 fit non-convergence.
Human-readable output rounds to 4 significant digits; --format json emits
full precision with a stable key set.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import analysis, fitting, traceio
from .config import ConfigError, load_config
from .detection import synthesize_shot_reference, synthesize_trace
from .opo import (
    ParameterDomainError,
    PumpSpec,
    VarianceLevels,
    cavity_decay_rate,
    escape_efficiency,
    pump_parameter,
    spectral_point,
    threshold_power,
)
from .detection import detection_efficiency
from .traceio import TraceFormatError

_CIRCUIT_NOTE = (
    "observed levels assume the same electronic floor in both the signal and "
    "the shot-noise reference; the anti-squeezing value is sensitive to this "
    "convention choice."
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _fmt(value) -> str:
    return f"{value:.4g}"


def _require_acquisition(cfg):
    if cfg.acquisition is None:
        raise ConfigError("this command needs [acquisition] (and optionally [scan]) in the config")
    return cfg.acquisition


def _parse_level_pair(text: str) -> VarianceLevels:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"expected 'smin_db,smax_db', got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"non-numeric level in {text!r}") from None
    return VarianceLevels.from_db(lo, hi)


def _cmd_predict(args) -> int:
    cfg = load_config(args.config)
    p_th = threshold_power(cfg.cavity)
    rho = escape_efficiency(cfg.cavity)
    alpha = detection_efficiency(cfg.detection)
    frequency = cfg.acquisition.center_frequency if cfg.acquisition else args.frequency_hz
    point = spectral_point(cfg.cavity, frequency)
    x = pump_parameter(cfg.pump, p_th)
    levels = analysis.predict_levels(cfg.cavity, cfg.detection, cfg.pump, frequency)
    observed = None
    if args.circuit_noise:
        observed = analysis.predict_levels(cfg.cavity, cfg.detection, cfg.pump,
                                           frequency, include_circuit_noise=True)
    if args.format == "json":
        payload = {
            "threshold_w": p_th,
            "escape_efficiency": rho,
            "detection_efficiency": alpha,
            "decay_rate_rad_s": cavity_decay_rate(cfg.cavity),
            "detuning": point.detuning_parameter,
            "pump_parameter": x,
            "s_min_db": levels.s_min_db,
            "s_max_db": levels.s_max_db,
            "observed_s_min_db": observed.s_min_db if observed else None,
            "observed_s_max_db": observed.s_max_db if observed else None,
            "note": _CIRCUIT_NOTE if observed else None,
        }
        print(json.dumps(payload, indent=2))
    else:
        print(f"P_th = {_fmt(p_th * 1e3)} mW")
        print(f"rho = {_fmt(rho)}")
        print(f"alpha = {_fmt(alpha)}")
        print(f"gamma = {_fmt(cavity_decay_rate(cfg.cavity))} rad/s")
        print(f"Omega = {_fmt(point.detuning_parameter)}")
        print(f"x = {_fmt(x)}")
        print(f"s_min = {_fmt(levels.s_min_db)} dB")
        print(f"s_max = {_fmt(levels.s_max_db)} dB")
        if observed:
            print(f"s_min_observed = {_fmt(observed.s_min_db)} dB")
            print(f"s_max_observed = {_fmt(observed.s_max_db)} dB")
            print(f"note: {_CIRCUIT_NOTE}")
    return 0


def _cmd_synth(args) -> int:
    cfg = load_config(args.config)
    acq = _require_acquisition(cfg)
    if args.shot_reference:
        trace = synthesize_shot_reference(acq, cfg.detection, args.seed)
    else:
        alpha = detection_efficiency(cfg.detection)
        rho = escape_efficiency(cfg.cavity)
        x = pump_parameter(cfg.pump, threshold_power(cfg.cavity))
        omega_norm = spectral_point(cfg.cavity, acq.center_frequency).detuning_parameter
        trace = synthesize_trace(alpha, rho, x, omega_norm, cfg.detection, acq, args.seed)
    traceio.save_trace(trace, args.out)
    print(f"wrote {len(trace)} samples to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    cfg = load_config(args.config)
    trace = traceio.load_trace(args.trace)
    frequency = trace.acquisition.center_frequency
    omega_norm = spectral_point(cfg.cavity, frequency).detuning_parameter
    clearance = cfg.detection.circuit_noise_clearance_db
    jitter = trace.acquisition.lo_scan.jitter_sigma
    guess = fitting.initial_guess(trace, clearance_db=clearance, omega_norm=omega_norm,
                                  jitter_sigma=jitter)
    result = fitting.fit_trace(trace, guess)
    if args.format == "json":
        payload = {
            "s_min_db": result.levels.s_min_db,
            "s_min_sigma_db": result.s_min_sigma_db,
            "s_max_db": result.levels.s_max_db,
            "s_max_sigma_db": result.s_max_sigma_db,
            "theta0_rad": result.model.theta0,
            "scan_rate_rad_s": result.model.scan_rate,
            "residual_rms_db": result.residual_rms_db,
            "iterations": result.iterations,
            "converged": result.converged,
            "phase_identifiable": result.phase_identifiable,
            "uncertainty_convention": "1-sigma",
        }
        print(json.dumps(payload, indent=2))
    else:
        print(f"s_min = {_fmt(result.levels.s_min_db)} +/- {_fmt(result.s_min_sigma_db)} dB (1 sigma)")
        print(f"s_max = {_fmt(result.levels.s_max_db)} +/- {_fmt(result.s_max_sigma_db)} dB (1 sigma)")
        print(f"theta0 = {_fmt(result.model.theta0)} rad")
        print(f"scan_rate = {_fmt(result.model.scan_rate)} rad/s")
        print(f"residual_rms = {_fmt(result.residual_rms_db)} dB")
        print(f"iterations = {result.iterations}")
        print(f"converged = {'yes' if result.converged else 'no'}")
        if not result.phase_identifiable:
            print("warning: flat trace, phase not identifiable (theta0 sigma = full period)")
    return 0 if result.converged else 2


def _load_measured_csv(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("power_mw"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ConfigError(f"{path}:{lineno}: expected 'power_mw,s_min_db,s_max_db'")
            try:
                power_mw, lo, hi = (float(p) for p in parts)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
            rows.append((power_mw * 1e-3, VarianceLevels.from_db(lo, hi)))
    return rows


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if bool(args.gains) == bool(args.powers):
        raise ConfigError("provide exactly one of --gains or --powers")
    pumps = []
    if args.gains:
        for item in args.gains.split(","):
            pumps.append(PumpSpec(parametric_gain=float(item)))
    else:
        from .config import _parse_quantity
        for item in args.powers.split(","):
            watts = _parse_quantity(item.strip(), "power", "power", 0)
            pumps.append(PumpSpec(pump_power=watts))
    frequency = cfg.acquisition.center_frequency if cfg.acquisition else args.frequency_hz
    measured = _load_measured_csv(args.measured) if args.measured else None
    rows = analysis.sweep_pump(cfg.cavity, cfg.detection, pumps, frequency, measured)
    records = []
    for r in rows:
        records.append({
            "power_mw": r.pump_power * 1e3,
            "gain": r.parametric_gain,
            "x": r.pump_parameter,
            "s_min_db": r.predicted.s_min_db if r.predicted else None,
            "s_max_db": r.predicted.s_max_db if r.predicted else None,
            "measured_s_min_db": r.measured.s_min_db if r.measured else None,
            "measured_s_max_db": r.measured.s_max_db if r.measured else None,
            "valid": r.valid,
        })
    if args.format == "json":
        print(json.dumps(records, indent=2))
    else:
        cols = ["power_mw", "gain", "x", "s_min_db", "s_max_db",
                "measured_s_min_db", "measured_s_max_db", "valid"]
        print(",".join(cols))
        for rec in records:
            cells = []
            for c in cols:
                v = rec[c]
                if v is None:
                    cells.append("")
                elif isinstance(v, bool):
                    cells.append(str(v).lower())
                elif args.format == "text":
                    cells.append(_fmt(v))
                else:
                    cells.append(repr(v))
            print(",".join(cells))
    return 0


def _cmd_reconcile(args) -> int:
    cfg = load_config(args.config)
    measured = _parse_level_pair(args.measured)
    frequency = cfg.acquisition.center_frequency if cfg.acquisition else args.frequency_hz
    result = analysis.reconcile_discrepancy(measured, cfg.cavity, cfg.detection,
                                            cfg.pump, frequency)
    loss_only = analysis.loss_only_explanation_check(measured, cfg.cavity, cfg.detection,
                                                     cfg.pump, frequency)
    if args.format == "json":
        payload = {
            "gain_scale": result.gain_scale,
            "efficiency_scale": result.efficiency_scale,
            "residual_db": result.residual_db,
            "amplitude_gain_scale": result.amplitude_gain_scale,
            "corrected_gain": result.corrected_gain,
            "exact_match": result.exact_match,
            "loss_only_feasible": loss_only.feasible,
            "loss_only_efficiency_scale": loss_only.efficiency_scale,
            "loss_only_s_max_error_db": loss_only.s_max_error_db,
        }
        print(json.dumps(payload, indent=2))
    else:
        print(f"gain_scale = {_fmt(result.gain_scale)} (corrected G = {_fmt(result.corrected_gain)})")
        print(f"amplitude_gain_scale = {_fmt(result.amplitude_gain_scale)} (sqrt-gain correction)")
        print(f"efficiency_scale = {_fmt(result.efficiency_scale)}")
        print(f"residual = {_fmt(result.residual_db)} dB")
        print(f"loss_only = {'feasible' if loss_only.feasible else 'infeasible'} "
              f"(s_max error {_fmt(loss_only.s_max_error_db)} dB at "
              f"efficiency_scale {_fmt(loss_only.efficiency_scale)})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sqzlab", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--format", choices=("text", "json", "csv"), default="text")
        p.add_argument("--frequency-hz", type=float, default=1e6, dest="frequency_hz",
                       help="analysis frequency when the config has no [acquisition] block")

    p = sub.add_parser("predict", help="predicted squeezing/anti-squeezing levels")
    add_common(p)
    p.add_argument("--circuit-noise", action="store_true",
                   help="also report levels as observed against the measured shot noise")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("synth", help="synthesize a scanned-phase noise trace")
    add_common(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output trace file")
    p.add_argument("--shot-reference", action="store_true",
                   help="synthesize the shot-noise reference (OPO blocked) instead")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("fit", help="fit a noise trace")
    add_common(p)
    p.add_argument("--trace", required=True, help="trace file to fit")
    p.add_argument("--report", choices=("text", "json"), dest="format",
                   default=argparse.SUPPRESS, help="alias for --format")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("sweep", help="pump sweep table")
    add_common(p)
    p.add_argument("--gains", help="comma-separated parametric gains")
    p.add_argument("--powers", help="comma-separated pump powers with units, e.g. 40mW,61mW")
    p.add_argument("--measured", help="CSV of measured rows: power_mw,s_min_db,s_max_db")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("reconcile", help="gain/loss reconciliation against measured levels")
    add_common(p)
    p.add_argument("--measured", required=True, help="measured levels 'smin_db,smax_db'")
    p.set_defaults(func=_cmd_reconcile)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # join "--measured -2.75,7.00" so argparse does not read the value as a flag
    for i, token in enumerate(argv[:-1]):
        if token == "--measured" and argv[i + 1].startswith("-"):
            argv[i : i + 2] = [f"--measured={argv[i + 1]}"]
            break
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TraceFormatError, ParameterDomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
