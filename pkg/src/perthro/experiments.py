"""End-to-end experiment runners behind the command line.

Every runner takes a fully resolved config dict (defaults < file < flags),
writes its artifacts into ``output_dir`` and returns the metrics dict.  The
metrics JSON holds only seeded, deterministic quantities so a rerun from the
written manifest reproduces it byte for byte; timings go to
``train_report.json`` instead.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import platform
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .circuit import Circuit, Head, count_parameters
from .datasets import (
    AIRFOIL_SCHEMA,
    IRIS_SCHEMA,
    bundled_iris_path,
    data_manifest,
    load_csv,
    normalize,
    split,
    xor_dataset,
)
from .errors import ConfigError, PerthroError
from .block import PerthroBlock
from .pulses import frequency_sweep, rabi_experiment, write_curve_csv
from .qubit import MeasurementConfig, emulate_iq_readout, make_rng, write_iq_csv
from .training import TrainConfig, evaluate, predict_labels, sampled_outputs, train

EXPERIMENTS = ("xor", "iris", "airfoil", "calibrate")

_TRAIN_KEYS = ("learning_rate", "epochs", "batch_size", "init_scale", "optimizer", "momentum", "beta1", "beta2", "epsilon")

DEFAULTS = {
    "xor": {
        "sizes": [2],
        "head": {"kind": "threshold", "params": {}},
        "loss": "mse",
        "optimizer": "adam",
        "learning_rate": 0.1,
        "epochs": 5000,
        "batch_size": 4,
        "trials": 1024,
    },
    "iris": {
        "sizes": [6, 12, 3],
        "head": {"kind": "softmax", "params": {"num_classes": 3}},
        "loss": "categorical_cross_entropy",
        "optimizer": "adam",
        "learning_rate": 1e-3,
        "epochs": 200,
        "batch_size": 16,
        "train_fraction": 0.8,
        "data_path": None,
    },
    "airfoil": {
        "sizes": [6, 12, 1],
        "head": {"kind": "identity", "params": {}},
        "loss": "mse",
        "optimizer": "adam",
        "learning_rate": 1e-3,
        "epochs": 600,
        "batch_size": 16,
        "train_fraction": 0.8,
        "data_path": None,
    },
    "calibrate": {
        "qubit_frequency_hz": 4.97e9,
        "sweep_span_hz": 1.0e8,
        "sweep_points": 101,
        "sweep_noise": 0.05,
        "linewidth_hz": 5.0e6,
        "rabi_max_amplitude": 2.0,
        "rabi_points": 41,
        "sweep_only": False,
        "iq_shots": 128,
    },
}

COMMON = {
    "seed": 0,
    "shots": 1024,
    "output_dir": None,
    "circuit": None,
    "init_scale": 0.5,
    "momentum": 0.9,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "plot": False,
}

_TYPES = {
    "seed": int,
    "shots": int,
    "epochs": int,
    "batch_size": int,
    "trials": int,
    "sweep_points": int,
    "rabi_points": int,
    "iq_shots": int,
    "learning_rate": float,
    "init_scale": float,
    "momentum": float,
    "beta1": float,
    "beta2": float,
    "epsilon": float,
    "train_fraction": float,
    "qubit_frequency_hz": float,
    "sweep_span_hz": float,
    "sweep_noise": float,
    "linewidth_hz": float,
    "rabi_max_amplitude": float,
    "sweep_only": bool,
    "plot": bool,
    "optimizer": str,
    "loss": str,
    "data_path": (str, type(None)),
    "circuit": (str, type(None)),
    "output_dir": (str, type(None)),
    "sizes": list,
    "head": dict,
}


def read_config_file(path) -> dict:
    """Load a YAML or JSON config; a run manifest is accepted and its config reused."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"config: file not found: {path}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"config: cannot parse {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config: {path} must hold a mapping")
    if "config" in data and "config_sha256" in data:
        data = data["config"]
    return data


def resolve_config(experiment: str | None, file_values: dict | None = None, overrides: dict | None = None) -> dict:
    """Merge defaults, file values and flag overrides (highest precedence last)."""
    file_values = dict(file_values or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    experiment = overrides.pop("experiment", None) or experiment or file_values.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: expected one of {EXPERIMENTS}, got {experiment!r}")
    cfg = dict(COMMON)
    cfg.update(copy.deepcopy(DEFAULTS[experiment]))
    allowed = set(cfg) | {"experiment"}
    for source in (file_values, overrides):
        for key, value in source.items():
            if key not in allowed:
                raise ConfigError(f"{key}: unknown setting for experiment {experiment!r}")
            cfg[key] = value
    cfg["experiment"] = experiment
    for key, expected in _TYPES.items():
        if key not in cfg:
            continue
        value = cfg[key]
        if expected is float and isinstance(value, int) and not isinstance(value, bool):
            cfg[key] = value = float(value)
        if expected is not bool and isinstance(value, bool):
            raise ConfigError(f"{key}: expected {getattr(expected, '__name__', expected)}, got a boolean")
        if not isinstance(value, expected):
            raise ConfigError(f"{key}: expected {getattr(expected, '__name__', expected)}, got {value!r}")
    if cfg["output_dir"] is None:
        cfg["output_dir"] = str(Path("runs") / experiment)
    if experiment != "calibrate":
        try:
            TrainConfig(**{k: cfg[k] for k in _TRAIN_KEYS}, seed=cfg["seed"])
        except PerthroError as exc:
            raise ConfigError(f"training settings: {exc}") from exc
    if cfg.get("shots", 1) < 1:
        raise ConfigError("shots: must be positive")
    if cfg["seed"] < 0:
        raise ConfigError("seed: must be a non-negative integer")
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _versions() -> dict:
    return {"perthro": __version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def write_manifest(out: Path, cfg: dict, data: dict | None = None) -> Path:
    manifest = {
        "experiment": cfg["experiment"],
        "seed": cfg["seed"],
        "config_sha256": config_hash(cfg),
        "config": cfg,
        "versions": _versions(),
        "data": data,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def build_circuit(cfg: dict, input_dim: int) -> Circuit:
    """Circuit from a definition file when configured, else from ``sizes``/``head``.

    File blocks that omit ``weights`` are initialized from the seed.
    """
    head = Head.from_dict(cfg["head"])
    if cfg.get("circuit"):
        path = Path(cfg["circuit"])
        try:
            layout = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"circuit: file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"circuit: {path} is not valid JSON: {exc}") from exc
        rng = make_rng(cfg["seed"])
        blocks = []
        try:
            for entry in layout["blocks"]:
                if "weights" in entry:
                    blocks.append(PerthroBlock.from_dict(entry))
                else:
                    n, d = int(entry["n"]), int(entry["d"])
                    s = cfg["init_scale"]
                    blocks.append(PerthroBlock(rng.uniform(-s, s, size=(n, d)), np.zeros(n)))
            head = Head.from_dict(layout["head"]) if "head" in layout else head
            circuit = Circuit(blocks, head)
        except (KeyError, TypeError, ValueError, PerthroError) as exc:
            raise ConfigError(f"circuit: invalid circuit file {path}: {exc}") from exc
    else:
        try:
            circuit = Circuit.initialized(input_dim, [int(n) for n in cfg["sizes"]], head, cfg["init_scale"], cfg["seed"])
        except PerthroError as exc:
            raise ConfigError(f"sizes: {exc}") from exc
    if circuit.input_dim != input_dim:
        raise ConfigError(f"circuit: expects {circuit.input_dim} inputs but the dataset has {input_dim} features")
    return circuit


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(**{k: cfg[k] for k in _TRAIN_KEYS}, seed=cfg["seed"])


def _finish_training(out: Path, cfg: dict, model: Circuit, report) -> None:
    model.save(out / "circuit.json")
    report.write_csv(out / "training_curve.csv")
    report.write_json(out / "train_report.json")


def write_xor_scatter(path: Path, circuit: Circuit, trials: int, shots: int, seed) -> float:
    """Shot-sampled ``(P1, P2)`` over ``trials`` runs cycling through the XOR inputs."""
    ds = xor_dataset()
    idx = np.arange(trials) % len(ds)
    X = ds.features[idx]
    Z = sampled_outputs(circuit, X, shots, make_rng([seed, 1024]))
    predicted = predict_labels(circuit, Z)
    truth = ds.labels[idx]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial", "x1", "x2", "p1", "p2", "ground_truth", "prediction"])
        for t in range(trials):
            writer.writerow([t, int(X[t, 0]), int(X[t, 1]), repr(float(Z[t, 0])), repr(float(Z[t, 1])), int(truth[t]), int(predicted[t])])
    return float(np.mean(predicted == truth))


def run_xor(cfg: dict) -> dict:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out, cfg)
    ds = xor_dataset()
    circuit = build_circuit(cfg, ds.num_features)
    model, report = train(circuit, ds, cfg["loss"], _train_config(cfg))
    accuracy = evaluate(model, ds, "accuracy")
    report.final_test_metric = accuracy
    _finish_training(out, cfg, model, report)
    shot_accuracy = write_xor_scatter(out / "xor_scatter.csv", model, cfg["trials"], cfg["shots"], cfg["seed"])
    metrics = {
        "experiment": "xor",
        "seed": cfg["seed"],
        "initial_loss": report.initial_loss,
        "final_loss": report.loss[-1],
        "noiseless_accuracy": accuracy,
        "shot_accuracy": shot_accuracy,
        "shots": cfg["shots"],
        "trials": cfg["trials"],
        "parameters": count_parameters(model),
        "qubits": model.qubit_count,
        "pulses": [b.pulse_count for b in model.blocks],
    }
    _write_json(out / "metrics.json", metrics)
    return metrics


def load_dataset(cfg: dict):
    if cfg["experiment"] == "iris":
        path = Path(cfg["data_path"]) if cfg.get("data_path") else bundled_iris_path()
        schema = IRIS_SCHEMA
    else:
        if not cfg.get("data_path"):
            raise ConfigError(
                "data_path: the airfoil experiment needs the UCI Airfoil Self-Noise file "
                "(airfoil_self_noise.dat); pass --data PATH"
            )
        path = Path(cfg["data_path"])
        schema = AIRFOIL_SCHEMA
    if not path.is_file():
        raise ConfigError(f"data_path: file not found: {path}")
    raw = load_csv(path, schema)
    return raw, data_manifest(path, schema, cfg["seed"], cfg["train_fraction"])


def run_supervised(cfg: dict) -> dict:
    """Shared pipeline for the Iris classification and Airfoil regression runs."""
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    raw, provenance = load_dataset(cfg)
    write_manifest(out, cfg, provenance)
    train_raw, test_raw = split(raw, cfg["train_fraction"], cfg["seed"])
    train_ds, test_ds, norm = normalize(train_raw, test_raw)
    circuit = build_circuit(cfg, train_ds.num_features)
    model, report = train(circuit, train_ds, cfg["loss"], _train_config(cfg), validation=test_ds)
    classify = raw.kind == "classification"
    metric = "accuracy" if classify else "mse"
    test_metric = evaluate(model, test_ds, metric)
    report.final_test_metric = test_metric
    _finish_training(out, cfg, model, report)
    _write_json(out / "normalization.json", norm.to_dict())
    metrics = {
        "experiment": cfg["experiment"],
        "seed": cfg["seed"],
        "train_size": len(train_ds),
        "test_size": len(test_ds),
        "initial_loss": report.initial_loss,
        "final_loss": report.loss[-1],
        "parameters": count_parameters(model),
        "qubits": model.qubit_count,
        "pulses": [b.pulse_count for b in model.blocks],
        "shots": cfg["shots"],
    }
    if classify:
        metrics["train_accuracy"] = evaluate(model, train_ds, "accuracy")
        metrics["test_accuracy"] = test_metric
        metrics["test_accuracy_shots"] = evaluate(model, test_ds, "accuracy", shots=cfg["shots"], seed=cfg["seed"])
    else:
        metrics["train_mse"] = evaluate(model, train_ds, "mse")
        metrics["test_mse"] = test_metric
        metrics["test_mse_shots"] = evaluate(model, test_ds, "mse", shots=cfg["shots"], seed=cfg["seed"])
    _write_json(out / "metrics.json", metrics)
    return metrics


def run_calibrate(cfg: dict) -> dict:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out, cfg)
    f0 = cfg["qubit_frequency_hz"]
    half = 0.5 * cfg["sweep_span_hz"]
    grid = np.linspace(f0 - half, f0 + half, cfg["sweep_points"])
    sweep = frequency_sweep(f0, grid, cfg["sweep_noise"], [cfg["seed"], 1], cfg["linewidth_hz"])
    write_curve_csv(out / "sweep.csv", "frequency_hz", "signal", sweep.frequencies, sweep.signal)
    result = sweep.result
    if not cfg["sweep_only"]:
        amps = np.linspace(0.0, cfg["rabi_max_amplitude"], cfg["rabi_points"])
        rabi = rabi_experiment(amps, cfg["shots"], [cfg["seed"], 2], resonant_frequency=result.resonant_frequency)
        write_curve_csv(out / "rabi.csv", "amplitude", "probability", rabi.amplitudes, rabi.probabilities)
        result = rabi.result
        # readout clouds after a half and a double pi-pulse
        for name, amplitude, stream in (("iq_half_pi.csv", 0.5, 3), ("iq_double_pi.csv", 2.0, 4)):
            p = min(max(float(np.sin(0.5 * np.pi * amplitude / result.pi_amplitude) ** 2), 0.0), 1.0)
            mcfg = MeasurementConfig(shots=cfg["iq_shots"], rng_seed=cfg["seed"])
            write_iq_csv(emulate_iq_readout(p, mcfg, make_rng([cfg["seed"], stream])), out / name)
    result.save(out / "calibration.json")
    metrics = {"experiment": "calibrate", "seed": cfg["seed"], **result.to_dict()}
    _write_json(out / "metrics.json", metrics)
    return metrics


def run_experiment(cfg: dict) -> dict:
    if cfg["experiment"] == "xor":
        metrics = run_xor(cfg)
    elif cfg["experiment"] == "calibrate":
        metrics = run_calibrate(cfg)
    else:
        metrics = run_supervised(cfg)
    if cfg.get("plot"):
        from .plots import render_run_dir

        render_run_dir(cfg["output_dir"])
    return metrics
