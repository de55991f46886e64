"""Single-qubit state, pulse rotations, measurement and readout emulation.

Amplitudes are expressed in units of the pi-pulse: a pulse of amplitude ``A``
rotates the Bloch vector by ``pi * A`` about the drive (y) axis, so the
excited-state probability after a train starting from ``|0>`` is
``sin^2(pi/2 * sum(A))``.

All random draws go through :func:`make_rng`, i.e. numpy's ``Generator``
on the PCG64 bit generator seeded with the configured integer seed, so every
stochastic result is reproducible bit-for-bit for a given numpy release.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * math.pi


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _require_finite(value, name):
    if not np.all(np.isfinite(value)):
        raise DomainError(f"{name} must be finite, got {value!r}")


def _require_probability(p):
    _require_finite(p, "probability")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {p!r}")


@dataclass(frozen=True)
class QubitState:
    """Pure state on the Bloch sphere, ``cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>``."""

    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        _require_finite((self.theta, self.phi), "Bloch angles")
        theta, phi = _canonical_angles(self.theta, self.phi)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def ground(cls) -> "QubitState":
        return cls(0.0, 0.0)

    @classmethod
    def excited(cls) -> "QubitState":
        return cls(math.pi, 0.0)

    @classmethod
    def from_bloch_vector(cls, x: float, y: float, z: float) -> "QubitState":
        theta = math.atan2(math.hypot(x, y), z)
        phi = math.atan2(y, x) if (x or y) else 0.0
        return cls(theta, phi)

    @property
    def alpha(self) -> complex:
        return complex(math.cos(self.theta / 2.0), 0.0)

    @property
    def beta(self) -> complex:
        r = math.sin(self.theta / 2.0)
        return complex(r * math.cos(self.phi), r * math.sin(self.phi))

    def amplitudes(self) -> tuple[complex, complex]:
        return self.alpha, self.beta

    def bloch_vector(self) -> tuple[float, float, float]:
        s = math.sin(self.theta)
        return (s * math.cos(self.phi), s * math.sin(self.phi), math.cos(self.theta))

    def probability_excited(self) -> float:
        return math.sin(self.theta / 2.0) ** 2

    def probability_ground(self) -> float:
        return math.cos(self.theta / 2.0) ** 2


def _canonical_angles(theta, phi):
    theta = math.fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    if theta > math.pi:
        # past the south pole: same point reached from the opposite meridian
        theta = TWO_PI - theta
        phi = phi + math.pi
    phi = math.fmod(phi, TWO_PI)
    if phi < 0.0:
        phi += TWO_PI
    if phi >= TWO_PI:
        phi = 0.0
    return theta, phi


@dataclass(frozen=True)
class ExcitationModel:
    """Sinusoidal excitation response ``a * sin(eta * A + phase) + c``.

    ``phase`` is not pinned by the physical model and is kept as a free
    fitted parameter.
    """

    eta: float = 1.0
    a: float = 1.0
    c: float = 0.0
    phase: float = 0.0

    def __call__(self, amplitude):
        return self.a * np.sin(self.eta * np.asarray(amplitude, dtype=float) + self.phase) + self.c

    def to_dict(self) -> dict:
        return {"eta": self.eta, "a": self.a, "c": self.c, "phase": self.phase}

    @classmethod
    def from_dict(cls, data: dict) -> "ExcitationModel":
        return cls(
            eta=float(data["eta"]),
            a=float(data["a"]),
            c=float(data["c"]),
            phase=float(data.get("phase", 0.0)),
        )


@dataclass(frozen=True)
class MeasurementConfig:
    shots: int = 1024
    rng_seed: int = 0
    iq_ground_mean: tuple[float, float] = (-1.0, 0.5)
    iq_excited_mean: tuple[float, float] = (1.0, -0.5)
    iq_cloud_sigma: float = 0.3

    def __post_init__(self):
        if int(self.shots) != self.shots or self.shots < 1:
            raise DomainError(f"shots must be a positive integer, got {self.shots!r}")
        if not self.iq_cloud_sigma > 0:
            raise DomainError(f"iq_cloud_sigma must be positive, got {self.iq_cloud_sigma!r}")
        object.__setattr__(self, "shots", int(self.shots))
        object.__setattr__(self, "iq_ground_mean", tuple(float(v) for v in self.iq_ground_mean))
        object.__setattr__(self, "iq_excited_mean", tuple(float(v) for v in self.iq_excited_mean))


def probability_excited(cumulative_amplitude):
    """Probability of measuring ``|1>`` after a total drive ``cumulative_amplitude``.

    Accepts scalars or arrays; any finite real is valid since the law is
    periodic with period 2 in the amplitude.
    """
    _require_finite(cumulative_amplitude, "cumulative amplitude")
    p = np.sin(0.5 * np.pi * np.asarray(cumulative_amplitude, dtype=float)) ** 2
    return float(p) if p.ndim == 0 else p


def probability_ground(cumulative_amplitude):
    _require_finite(cumulative_amplitude, "cumulative amplitude")
    p = np.cos(0.5 * np.pi * np.asarray(cumulative_amplitude, dtype=float)) ** 2
    return float(p) if p.ndim == 0 else p


def apply_pulse(state: QubitState, amplitude: float) -> QubitState:
    """Rotate ``state`` about the drive axis by ``pi * amplitude``."""
    _require_finite(amplitude, "pulse amplitude")
    x, y, z = state.bloch_vector()
    angle = math.pi * float(amplitude)
    c, s = math.cos(angle), math.sin(angle)
    return QubitState.from_bloch_vector(x * c + z * s, y, z * c - x * s)


def apply_train(state: QubitState, amplitudes) -> list[QubitState]:
    """Apply pulses in order, returning the state after each one."""
    states = []
    for amplitude in amplitudes:
        state = apply_pulse(state, amplitude)
        states.append(state)
    return states


def sample_shots(p: float, cfg: MeasurementConfig, rng: np.random.Generator | None = None):
    """Draw ``cfg.shots`` projective measurements of a qubit with ``P(|1>) = p``.

    Returns ``(count_excited, estimate)``.  A fresh generator seeded from
    ``cfg.rng_seed`` is used unless ``rng`` is given.
    """
    _require_probability(p)
    rng = make_rng(cfg.rng_seed) if rng is None else rng
    count = int(rng.binomial(cfg.shots, p))
    return count, count / cfg.shots


class IQPoint(NamedTuple):
    i: float
    q: float
    label: int
    shot_index: int


def emulate_iq_readout(p: float, cfg: MeasurementConfig, rng: np.random.Generator | None = None) -> list[IQPoint]:
    """Emulate single-shot readout in the I/Q plane.

    Each shot is labelled excited with probability ``p`` and placed at a
    Gaussian offset (isotropic, ``cfg.iq_cloud_sigma``) from the mean of its
    cluster.
    """
    _require_probability(p)
    rng = make_rng(cfg.rng_seed) if rng is None else rng
    labels = (rng.random(cfg.shots) < p).astype(int)
    means = np.where(labels[:, None] == 1, cfg.iq_excited_mean, cfg.iq_ground_mean)
    points = means + cfg.iq_cloud_sigma * rng.standard_normal((cfg.shots, 2))
    return [IQPoint(float(i), float(q), int(lab), k) for k, ((i, q), lab) in enumerate(zip(points, labels))]


def write_iq_csv(points, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["i", "q", "label", "shot_index"])
        for pt in points:
            writer.writerow([repr(pt.i), repr(pt.q), pt.label, pt.shot_index])
    return path


def read_iq_csv(path) -> list[IQPoint]:
    with Path(path).open(newline="") as fh:
        return [
            IQPoint(float(row["i"]), float(row["q"]), int(row["label"]), int(row["shot_index"]))
            for row in csv.DictReader(fh)
        ]
