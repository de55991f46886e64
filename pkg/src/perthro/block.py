"""The Perthro block: one qubit driven by an amplitude-modulated pulse train.

Row ``i`` of the weight matrix and entry ``i`` of the bias set the amplitude
of pulse ``i``.  Because successive pulses keep rotating the same qubit, the
probability read after pulse ``i`` depends on the running sum of every
earlier pulse argument::

    S_i = sum_{j<=i} (<w_j, x> + b_j)
    z_i = sin^2(S_i) = sin^2(<w_i, x> + b_i + rho_i),   rho_i = S_{i-1}, rho_1 = 0

Weights and biases live directly in the sine argument (radians); the pulse
amplitude in pi-pulse units is ``(2 / pi) * (<w_i, x> + b_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .qubit import QubitState, apply_pulse


@dataclass
class PerthroBlock:
    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float, ndmin=2)
        self.biases = np.array(self.biases, dtype=float).reshape(-1)
        n, d = self.weights.shape
        if n < 1 or d < 1:
            raise UsageError(f"block needs n >= 1 pulses and d >= 1 inputs, got {n}x{d}")
        if self.biases.shape != (n,):
            raise UsageError(f"bias length {self.biases.size} does not match {n} weight rows")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise UsageError("block parameters must be finite")

    @property
    def pulse_count(self) -> int:
        return self.weights.shape[0]

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, n: int, d: int) -> "PerthroBlock":
        return cls(np.zeros((n, d)), np.zeros(n))

    def copy(self) -> "PerthroBlock":
        return PerthroBlock(self.weights.copy(), self.biases.copy())

    def num_parameters(self) -> int:
        return self.weights.size + self.biases.size

    def to_dict(self) -> dict:
        n, d = self.weights.shape
        return {
            "n": n,
            "d": d,
            "weights": [float(v) for v in self.weights.ravel()],
            "biases": [float(v) for v in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PerthroBlock":
        try:
            n, d = int(data["n"]), int(data["d"])
            weights = np.asarray(data["weights"], dtype=float)
            biases = np.asarray(data["biases"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"malformed block record: {exc}") from exc
        if weights.size != n * d:
            raise UsageError(f"block record declares {n}x{d} but holds {weights.size} weights")
        return cls(weights.reshape(n, d), biases)


@dataclass(frozen=True)
class BlockForwardTrace:
    x: np.ndarray
    partial_sums: np.ndarray
    rho: np.ndarray
    output: np.ndarray


def _check_input(block: PerthroBlock, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (block.input_dim,):
        raise UsageError(f"block expects an input of length {block.input_dim}, got shape {x.shape}")
    return x


def pulse_arguments(block: PerthroBlock, x) -> np.ndarray:
    """Per-pulse sine arguments ``<w_i, x> + b_i`` before accumulation."""
    return block.weights @ _check_input(block, x) + block.biases


def modulate_amplitudes(block: PerthroBlock, x) -> np.ndarray:
    """Pulse amplitudes in pi-pulse units, ``(2/pi) (<w_i, x> + b_i)``."""
    return (2.0 / np.pi) * pulse_arguments(block, x)


def forward(block: PerthroBlock, x) -> BlockForwardTrace:
    x = _check_input(block, x)
    s = np.cumsum(block.weights @ x + block.biases)
    rho = np.concatenate(([0.0], s[:-1]))
    return BlockForwardTrace(x=x.copy(), partial_sums=s, rho=rho, output=np.sin(s) ** 2)


def forward_via_pulse_sim(block: PerthroBlock, x) -> np.ndarray:
    """Evaluate the block by driving a simulated qubit pulse by pulse."""
    state = QubitState.ground()
    z = np.empty(block.pulse_count)
    for i, amplitude in enumerate(modulate_amplitudes(block, x)):
        state = apply_pulse(state, amplitude)
        z[i] = state.probability_excited()
    return z


def backward(trace: BlockForwardTrace, block: PerthroBlock, x, upstream_grad):
    """Gradients of ``<upstream_grad, z>`` with respect to W, b and x.

    ``dz_i/d(arg_j) = sin(2 S_i)`` for every ``j <= i``, so the gradient
    reaching pulse ``j`` is the suffix sum of ``upstream_i * sin(2 S_i)``
    over ``i >= j``.
    """
    x = _check_input(block, x)
    upstream = np.asarray(upstream_grad, dtype=float)
    n = block.pulse_count
    if upstream.shape != (n,):
        raise UsageError(f"upstream gradient must have length {n}, got shape {upstream.shape}")
    if trace.partial_sums.shape != (n,) or not np.array_equal(trace.x, x):
        raise UsageError("trace was produced for a different block or input")
    if not np.allclose(np.cumsum(block.weights @ x + block.biases), trace.partial_sums, rtol=0.0, atol=1e-12):
        raise UsageError("trace is stale: block parameters changed since the forward pass")
    g = upstream * np.sin(2.0 * trace.partial_sums)
    suffix = np.cumsum(g[::-1])[::-1]
    return np.outer(suffix, x), suffix, block.weights.T @ suffix


# Batched kernels used by training: X has one sample per row.


def forward_batch(block: PerthroBlock, X: np.ndarray):
    """Return ``(S, Z)`` for a batch, both of shape ``(batch, n)``."""
    s = np.cumsum(X @ block.weights.T + block.biases, axis=1)
    return s, np.sin(s) ** 2


def backward_batch(block: PerthroBlock, X: np.ndarray, S: np.ndarray, upstream: np.ndarray):
    """Summed parameter gradients over the batch plus per-sample input gradients."""
    g = upstream * np.sin(2.0 * S)
    suffix = np.cumsum(g[:, ::-1], axis=1)[:, ::-1]
    return suffix.T @ X, suffix.sum(axis=0), suffix @ block.weights
