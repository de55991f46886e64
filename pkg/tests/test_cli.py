import csv
import json

import pytest

from perthro import cli
from perthro.circuit import Circuit, Head
from perthro.errors import VerificationError
from perthro.pulses import CalibrationResult
from perthro.schedule import PulseSchedule


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def xor_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("xor")
    assert run("run", "xor", "--output-dir", out, "--plot") == 0
    return out


@pytest.fixture(scope="module")
def calibration(tmp_path_factory):
    out = tmp_path_factory.mktemp("cal")
    assert run("calibrate", "--output-dir", out) == 0
    return out


def test_calibrate_default(calibration):
    data = json.loads((calibration / "calibration.json").read_text())
    assert data["pi_amplitude"] == pytest.approx(1.0, abs=0.01)
    assert abs(data["resonant_frequency_hz"] - 4.97e9) <= 1e6
    for name in ("sweep.csv", "rabi.csv", "iq_half_pi.csv", "iq_double_pi.csv", "manifest.json", "metrics.json"):
        assert (calibration / name).exists()


def test_calibrate_sweep_only(tmp_path):
    assert run("calibrate", "--sweep-only", "--output-dir", tmp_path) == 0
    data = json.loads((tmp_path / "calibration.json").read_text())
    assert data["pi_amplitude"] is None and data["fit"] is None
    assert data["resonant_frequency_hz"] is not None
    assert not (tmp_path / "rabi.csv").exists()


def test_bad_config_path(tmp_path, capsys):
    assert run("calibrate", "--config", tmp_path / "missing.yaml") == 2
    assert "config" in capsys.readouterr().err


def test_unknown_and_mistyped_settings(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("epochs: many\n")
    assert run("run", "xor", "--config", cfg) == 2
    assert "epochs" in capsys.readouterr().err
    cfg.write_text("learning_rte: 0.1\n")
    assert run("run", "xor", "--config", cfg) == 2
    assert "learning_rte" in capsys.readouterr().err


def test_missing_circuit_and_data(tmp_path, capsys):
    assert run("run", "xor", "--circuit", tmp_path / "none.json", "--output-dir", tmp_path) == 2
    assert "circuit" in capsys.readouterr().err
    assert run("run", "iris", "--data", tmp_path / "none.data", "--output-dir", tmp_path) == 2
    assert "data_path" in capsys.readouterr().err
    assert run("run", "airfoil", "--output-dir", tmp_path) == 2
    assert "data_path" in capsys.readouterr().err


def test_malformed_data_exit_code(tmp_path, capsys):
    bad = tmp_path / "iris.data"
    bad.write_text("5.1,3.5,1.4,0.2,Iris-setosa\n5.0,oops,1.4,0.2,Iris-setosa\n")
    assert run("run", "iris", "--data", bad, "--output-dir", tmp_path / "o") == 3
    assert "line 2" in capsys.readouterr().err


def test_divergence_exit_code(tmp_path, capsys):
    code = run("run", "xor", "--optimizer", "sgd", "--learning-rate", "1e308", "--epochs", "10", "--output-dir", tmp_path)
    assert code == 4
    assert "epoch" in capsys.readouterr().err


def test_xor_run_artifacts(xor_run):
    metrics = json.loads((xor_run / "metrics.json").read_text())
    assert metrics["noiseless_accuracy"] == 1.0
    assert metrics["parameters"] == 6 and metrics["qubits"] == 1
    assert metrics["final_loss"] < metrics["initial_loss"]
    with (xor_run / "xor_scatter.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1024
    assert {"p1", "p2", "ground_truth"} <= set(rows[0])
    header = (xor_run / "training_curve.csv").read_text().splitlines()[0]
    assert header == "epoch,loss,accuracy"
    assert (xor_run / "training_curve.svg").exists() and (xor_run / "xor_scatter.svg").exists()
    manifest = json.loads((xor_run / "manifest.json").read_text())
    assert manifest["seed"] == 0 and len(manifest["config_sha256"]) == 64
    assert set(manifest["versions"]) >= {"perthro", "numpy", "python"}
    Circuit.load(xor_run / "circuit.json")


def test_rerun_from_manifest_is_identical(xor_run, tmp_path):
    assert run("run", "--config", xor_run / "manifest.json", "--output-dir", tmp_path) == 0
    assert (tmp_path / "metrics.json").read_bytes() == (xor_run / "metrics.json").read_bytes()


def test_precedence_flags_over_file(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("experiment: xor\nepochs: 3\nlearning_rate: 0.2\n")
    assert run("run", "--config", cfg, "--epochs", "2", "--output-dir", tmp_path / "o") == 0
    resolved = json.loads((tmp_path / "o" / "manifest.json").read_text())["config"]
    assert resolved["epochs"] == 2
    assert resolved["learning_rate"] == 0.2
    assert resolved["batch_size"] == 4


def test_iris_short_run(tmp_path):
    assert run("run", "iris", "--epochs", "2", "--output-dir", tmp_path) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["train_size"] == 120 and metrics["test_size"] == 30
    assert metrics["parameters"] == 153 and metrics["pulses"] == [6, 12, 3]
    assert metrics["final_loss"] < metrics["initial_loss"]
    header = (tmp_path / "training_curve.csv").read_text().splitlines()[0]
    assert header == "epoch,loss,accuracy,val_loss"
    assert json.loads((tmp_path / "manifest.json").read_text())["data"]["sha256"]


def test_export_and_verify_xor(xor_run, calibration, tmp_path):
    out = tmp_path / "s.json"
    assert run("export-schedule", "--circuit", xor_run / "circuit.json", "--input", "0,0",
               "--calibration", calibration / "calibration.json", "--output", out) == 0
    sched = PulseSchedule.load(out)
    assert len(sched.blocks) == 1 and len(sched.blocks[0].trains) == 1
    assert run("verify-schedule", "--schedule", out, "--circuit", xor_run / "circuit.json",
               "--calibration", calibration / "calibration.json") == 0


def test_mismatched_calibration(xor_run, calibration, tmp_path, capsys):
    out = tmp_path / "s.json"
    run("export-schedule", "--circuit", xor_run / "circuit.json", "--input", "1,0",
        "--calibration", calibration / "calibration.json", "--output", out)
    other = CalibrationResult(resonant_frequency=5.0e9, pi_amplitude=1.02).save(tmp_path / "other.json")
    code = run("verify-schedule", "--schedule", out, "--circuit", xor_run / "circuit.json", "--calibration", other)
    assert code == 5
    assert "calibration_ref" in capsys.readouterr().err


def test_iris_export_has_resets(calibration, tmp_path):
    circ = Circuit.initialized(4, [6, 12, 3], Head.softmax(3), seed=1).save(tmp_path / "iris.json")
    out = tmp_path / "s.json"
    assert run("export-schedule", "--circuit", circ, "--input", "0.2,0.4,0.6,0.8",
               "--calibration", calibration / "calibration.json", "--output", out) == 0
    trains = [b.trains for b in PulseSchedule.load(out).blocks]
    assert [[t.reset_after for t in ts] for ts in trains] == [[True, False], [True, True, False], [False]]


def test_verification_failure_aborts_write(xor_run, calibration, tmp_path, monkeypatch):
    def failing(*args, **kwargs):
        raise VerificationError("forced mismatch")

    monkeypatch.setattr(cli, "verify_schedule", failing)
    out = tmp_path / "s.json"
    code = run("export-schedule", "--circuit", xor_run / "circuit.json", "--input", "0,1",
               "--calibration", calibration / "calibration.json", "--output", out)
    assert code == 5
    assert not out.exists()


def test_export_input_validation(xor_run, calibration, tmp_path, capsys):
    args = ["export-schedule", "--circuit", xor_run / "circuit.json",
            "--calibration", calibration / "calibration.json", "--output", tmp_path / "s.json"]
    assert run(*args, "--input", "0,1,2") == 2
    assert run(*args, "--input", "a,b") == 2
    assert "input" in capsys.readouterr().err


def test_plot_subcommand(calibration, tmp_path):
    assert run("plot", calibration) == 0
    assert (calibration / "rabi.svg").exists() and (calibration / "iq_half_pi.svg").exists()
    assert run("plot", tmp_path) == 2
