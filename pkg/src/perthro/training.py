"""Losses, backpropagation through block chains, optimizers and the training loop.

Training works on mini-batches with numpy: every block's forward pass is a
cumulative sum over its pulse arguments, and the backward pass contracts the
upstream gradient with ``sin(2 S)`` and a reversed cumulative sum, so one
step costs ``O(batch * sum(n * d))``.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import block as blk
from .circuit import Circuit, softmax
from .datasets import Dataset
from .errors import TrainingError, UsageError
from .qubit import make_rng

LOSS_KINDS = ("mse", "categorical_cross_entropy")
OPTIMIZERS = ("sgd", "sgd_momentum", "adam")
_LOG_FLOOR = 1e-300


def loss(kind: str, prediction, target):
    """Loss value and its gradient with respect to ``prediction``.

    ``mse`` is the mean over every element of ``(p - t)^2``.  For
    ``categorical_cross_entropy`` the prediction holds class probabilities
    (rows for a batch) and the value is the mean over rows of
    ``-sum(t * log p)``.
    """
    p = np.asarray(prediction, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise UsageError(f"prediction shape {p.shape} does not match target shape {t.shape}")
    if kind == "mse":
        diff = p - t
        return float(np.mean(diff**2)), 2.0 * diff / diff.size
    if kind == "categorical_cross_entropy":
        rows = 1 if p.ndim <= 1 else p.shape[0]
        safe = np.maximum(p, _LOG_FLOOR)
        value = -float(np.sum(t * np.log(safe))) / rows
        return value + 0.0, -t / safe / rows  # + 0.0 turns -0.0 into 0.0
    raise UsageError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def _check_pairing(circuit: Circuit, kind: str):
    if kind not in LOSS_KINDS:
        raise UsageError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")
    if kind == "categorical_cross_entropy" and circuit.head.kind != "softmax":
        raise UsageError("categorical cross-entropy needs a softmax head")


def forward_batch(circuit: Circuit, X):
    """Batched forward pass; returns final ``Z`` plus per-block ``(inputs, S)``."""
    cache = []
    for b in circuit.blocks:
        S, Z = blk.forward_batch(b, X)
        cache.append((X, S))
        X = Z
    return X, cache


def batch_loss(circuit: Circuit, Z, T, kind: str):
    """Loss of final block outputs ``Z`` and its gradient with respect to ``Z``."""
    if kind == "categorical_cross_entropy":
        probs = softmax(Z)
        value, _ = loss(kind, probs, T)
        # softmax and cross-entropy fused: d/dz = (softmax(z) - t) / batch
        return value, (probs - T) / Z.shape[0]
    return loss(kind, Z, T)


def loss_and_gradients(circuit: Circuit, X, T, kind: str):
    """Mean loss over the batch and gradients in ``circuit.parameters()`` order."""
    _check_pairing(circuit, kind)
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    if X.ndim != 2 or X.shape[1] != circuit.input_dim:
        raise UsageError(f"inputs must have shape (batch, {circuit.input_dim}), got {X.shape}")
    if T.shape != (X.shape[0], circuit.output_dim):
        raise UsageError(f"targets must have shape ({X.shape[0]}, {circuit.output_dim}), got {T.shape}")
    Z, cache = forward_batch(circuit, X)
    value, upstream = batch_loss(circuit, Z, T, kind)
    grads = []
    for b, (inputs, S) in zip(reversed(circuit.blocks), reversed(cache)):
        gW, gb, upstream = blk.backward_batch(b, inputs, S, upstream)
        grads.extend((gb, gW))
    grads.reverse()
    return value, grads


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------


class SGD:
    def __init__(self, learning_rate):
        self.learning_rate = learning_rate

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.learning_rate * g


class MomentumSGD:
    def __init__(self, learning_rate, momentum=0.9):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity = None

    def step(self, params, grads):
        if self.velocity is None:
            self.velocity = [np.zeros_like(p) for p in params]
        for p, g, v in zip(params, grads, self.velocity):
            v *= self.momentum
            v -= self.learning_rate * g
            p += v


class Adam:
    def __init__(self, learning_rate, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.epsilon = beta1, beta2, epsilon
        self.t = 0
        self.m = self.v = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.epsilon)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 16
    seed: int = 0
    init_scale: float = 0.5
    optimizer: str = "adam"
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    shuffle: bool = True

    def __post_init__(self):
        if not (self.learning_rate >= 0 and math.isfinite(self.learning_rate)):
            raise UsageError(f"learning_rate must be a non-negative number, got {self.learning_rate!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise UsageError("epochs and batch_size must be positive")
        if not self.init_scale > 0:
            raise UsageError("init_scale must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise UsageError(f"unknown optimizer {self.optimizer!r}; expected one of {OPTIMIZERS}")

    def make_optimizer(self):
        if self.optimizer == "sgd":
            return SGD(self.learning_rate)
        if self.optimizer == "sgd_momentum":
            return MomentumSGD(self.learning_rate, self.momentum)
        return Adam(self.learning_rate, self.beta1, self.beta2, self.epsilon)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    loss: list = field(default_factory=list)
    accuracy: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    initial_loss: float = float("nan")
    final_test_metric: float | None = None
    wall_clock_seconds: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def write_csv(self, path) -> Path:
        path = Path(path)
        columns = ["epoch", "loss", "accuracy"] + (["val_loss"] if self.val_loss else [])
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for e, value in enumerate(self.loss, start=1):
                row = [e, repr(value), repr(self.accuracy[e - 1]) if self.accuracy else ""]
                if self.val_loss:
                    row.append(repr(self.val_loss[e - 1]))
                writer.writerow(row)
        return path

    def write_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path


def _is_classification(circuit: Circuit, dataset: Dataset) -> bool:
    return dataset.labels is not None and circuit.head.kind in ("threshold", "softmax")


def train(circuit: Circuit, dataset: Dataset, loss_kind: str, cfg: TrainConfig, validation: Dataset | None = None):
    """Mini-batch gradient descent on a copy of ``circuit``.

    Each epoch reshuffles with a generator seeded by ``(cfg.seed, epoch)``;
    the batch gradient is the mean of per-sample gradients.  After every
    epoch the full training loss (and accuracy for classifiers, validation
    loss when given) is recorded.  Raises :class:`TrainingError` on a
    non-finite loss.
    """
    _check_pairing(circuit, loss_kind)
    if len(dataset) == 0:
        raise UsageError("cannot train on an empty dataset")
    if dataset.num_features != circuit.input_dim or dataset.targets.shape[1] != circuit.output_dim:
        raise UsageError(
            f"dataset is {dataset.num_features}->{dataset.targets.shape[1]} but circuit is "
            f"{circuit.input_dim}->{circuit.output_dim}"
        )
    model = circuit.copy()
    params = model.parameters()
    optimizer = cfg.make_optimizer()
    report = TrainReport()
    classify = _is_classification(model, dataset)
    X, T = dataset.features, dataset.targets
    n = len(dataset)
    started = time.perf_counter()

    report.initial_loss = dataset_loss(model, dataset, loss_kind)
    for epoch in range(1, cfg.epochs + 1):
        order = make_rng([cfg.seed, epoch]).permutation(n) if cfg.shuffle else np.arange(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            # overflow surfaces as the non-finite check below, not as warnings
            with np.errstate(over="ignore", invalid="ignore"):
                value, grads = loss_and_gradients(model, X[idx], T[idx], loss_kind)
            if not math.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingError("non-finite loss or gradient", epoch=epoch)
            optimizer.step(params, grads)
        with np.errstate(over="ignore", invalid="ignore"):
            epoch_loss = dataset_loss(model, dataset, loss_kind)
        if not math.isfinite(epoch_loss):
            raise TrainingError("non-finite loss", epoch=epoch)
        report.loss.append(epoch_loss)
        if classify:
            report.accuracy.append(evaluate(model, dataset, "accuracy"))
        if validation is not None:
            report.val_loss.append(dataset_loss(model, validation, loss_kind))
    report.wall_clock_seconds = time.perf_counter() - started
    return model, report


def dataset_loss(circuit: Circuit, dataset: Dataset, loss_kind: str) -> float:
    Z, _ = forward_batch(circuit, dataset.features)
    value, _ = batch_loss(circuit, Z, dataset.targets, loss_kind)
    return value


def sampled_outputs(circuit: Circuit, X, shots: int, rng: np.random.Generator):
    """Final outputs when every block's probabilities are estimated from ``shots`` measurements.

    Each estimate, not the exact probability, feeds the next block, as it
    would on hardware.
    """
    X = np.asarray(X, dtype=float)
    for b in circuit.blocks:
        _, Z = blk.forward_batch(b, X)
        X = rng.binomial(shots, np.clip(Z, 0.0, 1.0)) / shots
    return X


def predict_labels(circuit: Circuit, Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if circuit.head.kind == "threshold":
        p1 = circuit.head.params["p1_threshold"]
        p2 = circuit.head.params["p2_threshold"]
        return np.where((Z[:, 0] >= p1) & (Z[:, 1] <= p2), 0, 1)
    # softmax is monotone, so argmax of z equals argmax of the class probabilities
    return np.argmax(Z, axis=1)


def evaluate(circuit: Circuit, dataset: Dataset, metric: str = "accuracy", shots: int | None = None, seed=0) -> float:
    """Accuracy (classification) or MSE (regression) of ``circuit`` on ``dataset``.

    With ``shots`` set, block outputs are replaced by shot-noise estimates.
    """
    if shots is None:
        Z, _ = forward_batch(circuit, dataset.features)
    else:
        Z = sampled_outputs(circuit, dataset.features, shots, make_rng(seed))
    if metric == "accuracy":
        if dataset.labels is None:
            raise UsageError("accuracy needs a labelled dataset")
        return float(np.mean(predict_labels(circuit, Z) == dataset.labels))
    if metric == "mse":
        return float(np.mean((Z - dataset.targets) ** 2))
    raise UsageError(f"unknown metric {metric!r}")
