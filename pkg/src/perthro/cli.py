"""Command-line entry point.

Settings resolve as flags > config file > built-in defaults.  Exit codes:
0 success, 1 other perthro errors, 2 configuration, 3 data, 4 training
divergence, 5 schedule/verification, 6 calibration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import Circuit
from .errors import ConfigError, PerthroError, ScheduleError, VerificationError
from .experiments import read_config_file, resolve_config, run_experiment
from .pulses import CalibrationResult
from .schedule import PulseSchedule, calibration_ref, compile_schedule, verify_schedule


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML or JSON config file (a run manifest also works)")
    p.add_argument("--seed", type=int)
    p.add_argument("--shots", type=int, help="shots per measurement")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--plot", action="store_true", default=None, help="render SVG figures from the CSVs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perthro", description="Perceptron-style single-qubit pulse circuits.")
    parser.add_argument("--version", action="version", version=f"perthro {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="simulated frequency sweep and Rabi calibration")
    _add_common(cal)
    cal.add_argument("--sweep-only", dest="sweep_only", action="store_true", default=None)

    run = sub.add_parser("run", help="train and evaluate an experiment")
    run.add_argument("experiment", nargs="?", choices=("xor", "iris", "airfoil"))
    _add_common(run)
    run.add_argument("--circuit", help="circuit definition JSON")
    run.add_argument("--data", dest="data_path", help="dataset file")
    run.add_argument("--epochs", type=int)
    run.add_argument("--learning-rate", dest="learning_rate", type=float)
    run.add_argument("--batch-size", dest="batch_size", type=int)
    run.add_argument("--optimizer", choices=("sgd", "sgd_momentum", "adam"))
    run.add_argument("--init-scale", dest="init_scale", type=float)
    run.add_argument("--train-fraction", dest="train_fraction", type=float)

    exp = sub.add_parser("export-schedule", help="compile a trained circuit for one input")
    exp.add_argument("--circuit", required=True)
    exp.add_argument("--input", required=True, help="comma-separated feature values")
    exp.add_argument("--calibration", required=True)
    exp.add_argument("--output", required=True)

    ver = sub.add_parser("verify-schedule", help="replay a schedule and compare with the circuit")
    ver.add_argument("--schedule", required=True)
    ver.add_argument("--circuit", required=True)
    ver.add_argument("--calibration", help="also check the schedule references this calibration")

    plot = sub.add_parser("plot", help="render SVGs from a run directory")
    plot.add_argument("run_dir")
    return parser


_OVERRIDE_KEYS = (
    "seed", "shots", "output_dir", "plot", "sweep_only", "circuit", "data_path", "epochs",
    "learning_rate", "batch_size", "optimizer", "init_scale", "train_fraction",
)


def _resolve(args, experiment):
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k) for k in _OVERRIDE_KEYS if hasattr(args, k)}
    return resolve_config(experiment, file_values, overrides)


def _load_circuit(path) -> Circuit:
    if not Path(path).exists():
        raise ConfigError(f"circuit: file not found: {path}")
    try:
        return Circuit.load(path)
    except PerthroError as exc:
        raise ConfigError(f"circuit: {exc}") from exc


def _load_calibration(path) -> CalibrationResult:
    if not Path(path).exists():
        raise ConfigError(f"calibration: file not found: {path}")
    return CalibrationResult.load(path)


def _parse_input(text: str):
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"input: expected comma-separated numbers, got {text!r}") from exc


def cmd_calibrate(args) -> int:
    cfg = _resolve(args, "calibrate")
    metrics = run_experiment(cfg)
    print(json.dumps(metrics, indent=2, sort_keys=True))
    print(f"wrote {Path(cfg['output_dir']) / 'calibration.json'}")
    return 0


def cmd_run(args) -> int:
    cfg = _resolve(args, args.experiment)
    if cfg["experiment"] == "calibrate":
        raise ConfigError("experiment: use the calibrate subcommand for calibration runs")
    metrics = run_experiment(cfg)
    print(json.dumps(metrics, indent=2, sort_keys=True))
    print(f"artifacts in {cfg['output_dir']}")
    return 0


def cmd_export_schedule(args) -> int:
    circuit = _load_circuit(args.circuit)
    calibration = _load_calibration(args.calibration)
    x = _parse_input(args.input)
    if x.size != circuit.input_dim:
        raise ConfigError(f"input: circuit expects {circuit.input_dim} values, got {x.size}")
    schedule = compile_schedule(circuit, x, calibration)
    # round-trip through JSON so the written bytes are what gets verified
    reparsed = PulseSchedule.from_json(schedule.to_json())
    deviation = verify_schedule(reparsed, circuit, x)
    Path(args.output).write_text(reparsed.to_json())
    trains = [len(b.trains) for b in reparsed.blocks]
    print(f"wrote {args.output}: trains per block {trains}, max deviation {deviation:.2e}")
    return 0


def cmd_verify_schedule(args) -> int:
    circuit = _load_circuit(args.circuit)
    schedule = PulseSchedule.load(args.schedule)
    if args.calibration:
        expected = calibration_ref(_load_calibration(args.calibration))
        if schedule.calibration_ref != expected:
            raise VerificationError(
                f"calibration_ref: schedule references {schedule.calibration_ref}, "
                f"{args.calibration} is {expected}"
            )
        pi_amp = _load_calibration(args.calibration).pi_amplitude
        if schedule.pulse_template.get("amplitude_scale") != pi_amp:
            raise VerificationError("pulse_template.amplitude_scale does not match the calibration")
    deviation = verify_schedule(schedule, circuit)
    print(f"schedule verified: max deviation {deviation:.2e}")
    return 0


def cmd_plot(args) -> int:
    from .plots import render_run_dir

    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        raise ConfigError(f"run_dir: not a directory: {run_dir}")
    written = render_run_dir(run_dir)
    if not written:
        raise ConfigError(f"run_dir: no plottable CSV files in {run_dir}")
    for path in written:
        print(f"wrote {path}")
    return 0


_COMMANDS = {
    "calibrate": cmd_calibrate,
    "run": cmd_run,
    "export-schedule": cmd_export_schedule,
    "verify-schedule": cmd_verify_schedule,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ScheduleError as exc:
        kind = "verification failed" if isinstance(exc, VerificationError) else "schedule error"
        print(f"perthro: {kind}: {exc}", file=sys.stderr)
        return exc.exit_code
    except PerthroError as exc:
        print(f"perthro: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
