"""SVG figures rendered from the CSV files an experiment writes."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_SVG_META = {"Date": None}


def _read(path):
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _save(fig, path):
    plt.rcParams["svg.hashsalt"] = "perthro"
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return Path(path)


def plot_training_curve(csv_path, svg_path):
    rows = _read(csv_path)
    epochs = [int(r["epoch"]) for r in rows]
    has_acc = any(r.get("accuracy") for r in rows)
    fig, axes = plt.subplots(1, 2 if has_acc else 1, figsize=(10 if has_acc else 5, 4), squeeze=False)
    loss_ax = axes[0, -1]
    loss_ax.plot(epochs, [float(r["loss"]) for r in rows], label="training")
    if rows and _has_column(rows, "val_loss"):
        loss_ax.plot(epochs, [float(r["val_loss"]) for r in rows], label="validation")
        loss_ax.legend()
    loss_ax.set_xlabel("epoch")
    loss_ax.set_ylabel("loss")
    if has_acc:
        acc_ax = axes[0, 0]
        acc_ax.plot(epochs, [float(r["accuracy"]) for r in rows])
        acc_ax.set_xlabel("epoch")
        acc_ax.set_ylabel("training accuracy")
    return _save(fig, svg_path)


def _has_column(rows, key):
    return key in rows[0] and rows[0][key] != ""


def plot_xor_scatter(csv_path, svg_path):
    rows = _read(csv_path)
    fig, ax = plt.subplots(figsize=(5, 5))
    for truth, colour in (("0", "tab:blue"), ("1", "tab:red")):
        pts = [(float(r["p1"]), float(r["p2"])) for r in rows if r["ground_truth"] == truth]
        if pts:
            xs, ys = zip(*pts)
            ax.scatter(xs, ys, s=8, c=colour, alpha=0.6, label=f"XOR = {truth}")
    ax.axvline(0.5, color="grey", lw=0.8)
    ax.axhline(0.5, color="grey", lw=0.8)
    ax.set_xlim(-0.05, 1.05)
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel("P1(|1>)")
    ax.set_ylabel("P2(|1>)")
    ax.legend()
    return _save(fig, svg_path)


def plot_iq(csv_path, svg_path):
    rows = _read(csv_path)
    fig, ax = plt.subplots(figsize=(5, 5))
    for label, colour, name in (("0", "tab:red", "ground"), ("1", "tab:blue", "excited")):
        pts = [(float(r["i"]), float(r["q"])) for r in rows if r["label"] == label]
        if pts:
            xs, ys = zip(*pts)
            ax.scatter(xs, ys, s=10, c=colour, alpha=0.6, label=name)
            ax.scatter([sum(xs) / len(xs)], [sum(ys) / len(ys)], marker="x", s=80, c="black")
    ax.set_xlabel("I")
    ax.set_ylabel("Q")
    ax.legend()
    return _save(fig, svg_path)


def plot_curve(csv_path, svg_path):
    rows = _read(csv_path)
    xname, yname = list(rows[0].keys())[:2]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([float(r[xname]) for r in rows], [float(r[yname]) for r in rows], marker=".")
    ax.set_xlabel(xname)
    ax.set_ylabel(yname)
    return _save(fig, svg_path)


_RENDERERS = {
    "training_curve.csv": plot_training_curve,
    "xor_scatter.csv": plot_xor_scatter,
    "iq_half_pi.csv": plot_iq,
    "iq_double_pi.csv": plot_iq,
    "sweep.csv": plot_curve,
    "rabi.csv": plot_curve,
}


def render_run_dir(run_dir) -> list[Path]:
    """Render an SVG next to every known CSV in ``run_dir``."""
    run_dir = Path(run_dir)
    written = []
    for name, renderer in _RENDERERS.items():
        src = run_dir / name
        if src.exists():
            written.append(renderer(src, src.with_suffix(".svg")))
    return written
