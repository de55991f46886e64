"""Sequential circuits of Perthro blocks with a classical head stage."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import block as blk
from .block import PerthroBlock
from .errors import UsageError
from .qubit import make_rng

HEAD_KINDS = ("threshold", "softmax", "identity")


@dataclass(frozen=True)
class Head:
    """Classical output stage.

    ``threshold`` predicts 0 iff ``z[0] >= p1_threshold`` and
    ``z[1] <= p2_threshold``; ``softmax`` classifies by the argmax of
    ``softmax(z)``; ``identity`` passes ``z`` through for regression.
    """

    kind: str = "identity"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in HEAD_KINDS:
            raise UsageError(f"unknown head kind {self.kind!r}; expected one of {HEAD_KINDS}")
        params = dict(self.params)
        if self.kind == "threshold":
            params = {"p1_threshold": float(params.get("p1_threshold", 0.5)),
                      "p2_threshold": float(params.get("p2_threshold", 0.5))}
        elif self.kind == "softmax":
            if "num_classes" not in params:
                raise UsageError("softmax head needs num_classes")
            params = {"num_classes": int(params["num_classes"])}
        else:
            params = {}
        object.__setattr__(self, "params", params)

    @classmethod
    def threshold(cls, p1_threshold=0.5, p2_threshold=0.5) -> "Head":
        return cls("threshold", {"p1_threshold": p1_threshold, "p2_threshold": p2_threshold})

    @classmethod
    def softmax(cls, num_classes: int) -> "Head":
        return cls("softmax", {"num_classes": num_classes})

    @classmethod
    def identity(cls) -> "Head":
        return cls("identity")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, data: dict) -> "Head":
        return cls(data["kind"], dict(data.get("params", {})))


@dataclass(frozen=True)
class HeadOutput:
    prediction: object
    probabilities: np.ndarray | None = None


def xor_head(z, p1_threshold: float = 0.5, p2_threshold: float = 0.5) -> int:
    """0 when the first probability is high and the second low, otherwise 1."""
    p1, p2 = float(z[0]), float(z[1])
    return 0 if (p1 >= p1_threshold and p2 <= p2_threshold) else 1


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def softmax_head(z) -> HeadOutput:
    probs = softmax(z)
    return HeadOutput(prediction=int(np.argmax(probs)), probabilities=probs)


class Circuit:
    """An ordered chain of blocks, each fed the previous block's probabilities."""

    def __init__(self, blocks, head: Head | None = None):
        self.blocks = [b if isinstance(b, PerthroBlock) else PerthroBlock(*b) for b in blocks]
        self.head = head or Head.identity()
        if not self.blocks:
            raise UsageError("a circuit needs at least one block")
        for k in range(1, len(self.blocks)):
            prev, cur = self.blocks[k - 1], self.blocks[k]
            if cur.input_dim != prev.pulse_count:
                raise UsageError(
                    f"block {k} expects {cur.input_dim} inputs but block {k - 1} emits {prev.pulse_count}"
                )
        out = self.blocks[-1].pulse_count
        if self.head.kind == "threshold" and out != 2:
            raise UsageError(f"threshold head needs a final block with 2 pulses, got {out}")
        if self.head.kind == "softmax" and out != self.head.params["num_classes"]:
            raise UsageError(
                f"softmax head over {self.head.params['num_classes']} classes needs a final block with that many pulses, got {out}"
            )

    def __repr__(self):
        sizes = "->".join(str(b.pulse_count) for b in self.blocks)
        return f"Circuit(in={self.input_dim}, blocks={sizes}, head={self.head.kind})"

    @property
    def input_dim(self) -> int:
        return self.blocks[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.blocks[-1].pulse_count

    @property
    def qubit_count(self) -> int:
        return len(self.blocks)

    @classmethod
    def initialized(cls, input_dim: int, sizes, head: Head | None = None, init_scale: float = 0.5, seed=0) -> "Circuit":
        """Weights uniform in ``[-init_scale, init_scale]``, biases zero."""
        rng = make_rng(seed)
        blocks, d = [], input_dim
        for n in sizes:
            blocks.append(PerthroBlock(rng.uniform(-init_scale, init_scale, size=(n, d)), np.zeros(n)))
            d = n
        return cls(blocks, head)

    def copy(self) -> "Circuit":
        return Circuit([b.copy() for b in self.blocks], self.head)

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order: W_0, b_0, W_1, b_1, ..."""
        out = []
        for b in self.blocks:
            out.extend((b.weights, b.biases))
        return out

    def to_dict(self) -> dict:
        return {"blocks": [b.to_dict() for b in self.blocks], "head": self.head.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        try:
            return cls([PerthroBlock.from_dict(b) for b in data["blocks"]], Head.from_dict(data["head"]))
        except (KeyError, TypeError) as exc:
            raise UsageError(f"malformed circuit record: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path

    @classmethod
    def load(cls, path) -> "Circuit":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise UsageError(f"circuit file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"circuit file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def circuit_forward(c: Circuit, x):
    """Run ``x`` through every block; returns ``(z_final, traces)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (c.input_dim,):
        raise UsageError(f"circuit expects an input of length {c.input_dim}, got shape {x.shape}")
    traces = []
    for b in c.blocks:
        trace = blk.forward(b, x)
        traces.append(trace)
        x = trace.output
    return x, traces


def apply_head(c: Circuit, z) -> HeadOutput:
    if c.head.kind == "threshold":
        return HeadOutput(prediction=xor_head(z, **c.head.params), probabilities=np.asarray(z))
    if c.head.kind == "softmax":
        return softmax_head(z)
    return HeadOutput(prediction=np.asarray(z, dtype=float), probabilities=None)


def predict(c: Circuit, x) -> HeadOutput:
    z, _ = circuit_forward(c, x)
    return apply_head(c, z)


def count_parameters(c: Circuit) -> int:
    return sum(b.pulse_count * (b.input_dim + 1) for b in c.blocks)
