"""Gaussian drive pulses, pulse trains and simulated qubit calibration.

Calibration follows the usual two-step procedure: a frequency sweep locates
the resonance (peak of the absorption curve), then a Rabi experiment sweeps
the drive amplitude and fits a sinusoid whose half period is the pi-pulse
amplitude.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .errors import CalibrationError, DomainError, UsageError
from .qubit import ExcitationModel, MeasurementConfig, make_rng, probability_excited

# Fitting controls for the Rabi sinusoid.
FIT_TOLERANCE = 1e-9
FIT_MAX_ITERATIONS = 200
# The grid must span most of one oscillation of the fitted sinusoid.
MIN_FIT_CYCLES = 0.9
_SCAN_POINTS = 2000


@dataclass(frozen=True)
class GaussianPulse:
    amplitude: float = 1.0
    frequency: float = 4.97e9
    duration_center: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.width) and self.width > 0):
            raise DomainError(f"pulse width must be positive, got {self.width!r}")
        if not all(math.isfinite(v) for v in (self.amplitude, self.frequency, self.duration_center)):
            raise DomainError("pulse parameters must be finite")

    def to_dict(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "duration_center": self.duration_center,
            "width": self.width,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianPulse":
        return cls(**{k: float(data[k]) for k in ("amplitude", "frequency", "duration_center", "width")})


def envelope(pulse: GaussianPulse, omega):
    """Gaussian envelope ``A * exp(-(omega - center)^2 / (2 width^2))``."""
    omega = np.asarray(omega, dtype=float)
    value = pulse.amplitude * np.exp(-((omega - pulse.duration_center) ** 2) / (2.0 * pulse.width**2))
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True)
class PulseTrain:
    amplitudes: tuple[float, ...]
    pulse_template: GaussianPulse = field(default_factory=GaussianPulse)

    def __post_init__(self):
        amps = tuple(float(a) for a in self.amplitudes)
        if not amps:
            raise UsageError("a pulse train needs at least one pulse")
        if not all(math.isfinite(a) for a in amps):
            raise DomainError("pulse amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)

    def __len__(self):
        return len(self.amplitudes)

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.amplitudes)

    def probabilities(self) -> np.ndarray:
        """``P(|1>)`` read after each pulse, starting from the ground state."""
        return probability_excited(self.cumulative())


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of a calibration run.

    ``pi_amplitude`` and ``fit`` are ``None`` for a sweep-only calibration.
    """

    resonant_frequency: float | None
    pi_amplitude: float | None = None
    fit: ExcitationModel | None = None
    fit_residual: float = 0.0

    def __post_init__(self):
        if self.pi_amplitude is not None and not self.pi_amplitude > 0:
            raise CalibrationError(f"pi_amplitude must be positive, got {self.pi_amplitude!r}")
        if not self.fit_residual >= 0:
            raise CalibrationError(f"fit residual must be non-negative, got {self.fit_residual!r}")

    def to_dict(self) -> dict:
        return {
            "resonant_frequency_hz": self.resonant_frequency,
            "pi_amplitude": self.pi_amplitude,
            "fit": None if self.fit is None else self.fit.to_dict(),
            "residual": self.fit_residual,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationResult":
        try:
            fit = data["fit"]
            return cls(
                resonant_frequency=None if data["resonant_frequency_hz"] is None else float(data["resonant_frequency_hz"]),
                pi_amplitude=None if data["pi_amplitude"] is None else float(data["pi_amplitude"]),
                fit=None if fit is None else ExcitationModel.from_dict(fit),
                fit_residual=float(data["residual"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CalibrationError(f"malformed calibration record: {exc}") from exc

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "CalibrationResult":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise CalibrationError(f"calibration file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise CalibrationError(f"calibration file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise CalibrationError(f"calibration file {path} must hold a JSON object")
        return cls.from_dict(data)


# ---------------------------------------------------------------------------
# frequency sweep
# ---------------------------------------------------------------------------


def absorption_curve(grid, resonant_frequency: float, linewidth: float):
    """Lorentzian absorption profile with unit peak and half width ``linewidth``."""
    detuning = (np.asarray(grid, dtype=float) - resonant_frequency) / linewidth
    return 1.0 / (1.0 + detuning**2)


@dataclass(frozen=True)
class SweepData:
    frequencies: np.ndarray
    signal: np.ndarray
    result: CalibrationResult


def _parabolic_peak(signal, k):
    if k == 0 or k == len(signal) - 1:
        return 0.0
    y0, y1, y2 = signal[k - 1], signal[k], signal[k + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom >= 0.0:
        return 0.0
    return 0.5 * (y0 - y2) / denom


def locate_peak(frequencies, signal) -> float:
    """Argmax of a sampled absorption curve, refined by a Lorentzian fit.

    The fit runs in grid-step units centred on the argmax so the solver
    tolerances are independent of the absolute frequency scale.
    """
    f = np.asarray(frequencies, dtype=float)
    y = np.asarray(signal, dtype=float)
    k = int(np.argmax(y))
    if len(f) < 4:
        return float(f[k])
    step = float(np.median(np.diff(f)))
    u = (f - f[k]) / step
    u0 = _parabolic_peak(y, k)

    above = u[y >= y[k] - 0.5 * (y[k] - np.min(y))]
    width0 = max(0.5 * (above.max() - above.min()), 1.0)

    def residual(p):
        center, width, height, base = p
        return height / (1.0 + ((u - center) / width) ** 2) + base - y

    start = np.array([u0, width0, y[k] - np.min(y), np.min(y)])
    try:
        sol = least_squares(residual, start, method="lm", xtol=1e-12, ftol=1e-12, max_nfev=2000)
    except ValueError:
        return float(f[k] + u0 * step)
    center = sol.x[0]
    # a fit that wandered away from the observed maximum is not trusted
    if not sol.success or not np.isfinite(center) or abs(center - u0) > 2.0 or sol.x[2] <= 0:
        center = u0
    return float(f[k] + center * step)


def frequency_sweep(
    true_qubit_freq: float,
    grid,
    noise_sigma: float = 0.0,
    seed=0,
    linewidth: float = 5e6,
) -> SweepData:
    """Simulate a resonance sweep and estimate the qubit frequency.

    The absorption signal is a unit-height Lorentzian of half width
    ``linewidth`` centred on ``true_qubit_freq`` plus Gaussian noise of
    standard deviation ``noise_sigma`` (relative to the peak).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise UsageError("frequency grid must be a non-empty 1-D sequence")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise UsageError("frequency grid must be strictly increasing")
    if noise_sigma < 0 or linewidth <= 0:
        raise DomainError("noise_sigma must be >= 0 and linewidth > 0")
    signal = absorption_curve(grid, true_qubit_freq, linewidth)
    if noise_sigma > 0:
        signal = signal + noise_sigma * make_rng(seed).standard_normal(grid.size)
    estimate = locate_peak(grid, signal)
    return SweepData(grid, signal, CalibrationResult(resonant_frequency=estimate))


# ---------------------------------------------------------------------------
# Rabi experiment
# ---------------------------------------------------------------------------


def _linear_sinusoid(amps, y, w, eta):
    design = np.column_stack([np.sin(eta * amps), np.cos(eta * amps), np.ones_like(amps)])
    coef, *_ = np.linalg.lstsq(design * w[:, None], y * w, rcond=None)
    resid = (design @ coef - y) * w
    return coef, float(resid @ resid)


def fit_excitation(amplitudes, response, sigma=None) -> tuple[ExcitationModel, float]:
    """Least-squares fit of ``a * sin(eta * A + phase) + c`` to measured data.

    A grid scan over ``eta`` (solving the linear sub-problem in
    ``sin``/``cos``/offset at each candidate) seeds a Levenberg-Marquardt
    refinement.  ``sigma`` optionally gives per-point standard errors for a
    weighted fit.  Returns the model (``a > 0``, ``phase`` in ``(-pi, pi]``)
    and the unweighted RMS residual.
    """
    amps = np.asarray(amplitudes, dtype=float)
    y = np.asarray(response, dtype=float)
    if amps.shape != y.shape or amps.ndim != 1:
        raise UsageError("amplitudes and response must be 1-D arrays of equal length")
    if sigma is None:
        w = np.ones_like(y)
    else:
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
        if np.any(~(sigma > 0)):
            raise UsageError("sigma must be positive")
        w = 1.0 / sigma
    if amps.size < 5:
        raise CalibrationError("at least five points are needed to fit a sinusoid")
    if not np.all(np.isfinite(y)):
        raise CalibrationError("response contains non-finite values")
    span = float(amps.max() - amps.min())
    if span <= 0:
        raise CalibrationError("amplitude grid has zero span")
    if np.ptp(y) <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        raise CalibrationError("response is constant; sinusoid is unconstrained")

    spacing = float(np.min(np.diff(np.unique(amps))))
    candidates = np.linspace(MIN_FIT_CYCLES * 2.0 * math.pi / span, math.pi / spacing, _SCAN_POINTS)
    costs = [_linear_sinusoid(amps, y, w, eta)[1] for eta in candidates]
    eta0 = candidates[int(np.argmin(costs))]
    (p0, q0, c0), _ = _linear_sinusoid(amps, y, w, eta0)

    def residual(params):
        eta, p, q, c = params
        return (p * np.sin(eta * amps) + q * np.cos(eta * amps) + c - y) * w

    sol = least_squares(
        residual,
        np.array([eta0, p0, q0, c0]),
        method="lm",
        xtol=FIT_TOLERANCE,
        ftol=FIT_TOLERANCE,
        max_nfev=FIT_MAX_ITERATIONS * 5,
    )
    eta, p, q, c = sol.x
    if eta < 0:
        eta, p = -eta, -p
    a = math.hypot(p, q)
    if not np.isfinite(sol.x).all() or a <= 1e-9:
        raise CalibrationError("sinusoid fit degenerated to zero amplitude")
    if eta * span < MIN_FIT_CYCLES * 2.0 * math.pi:
        raise CalibrationError(
            f"amplitude grid spans {eta * span / (2 * math.pi):.2f} oscillations; at least one is required"
        )
    # p sin + q cos = a sin(eta A + phase)
    phase = math.atan2(q, p)
    rms = math.sqrt(float(np.mean((sol.fun / w) ** 2)))
    return ExcitationModel(eta=float(eta), a=float(a), c=float(c), phase=float(phase)), rms


@dataclass(frozen=True)
class RabiData:
    amplitudes: np.ndarray
    probabilities: np.ndarray
    result: CalibrationResult


def rabi_experiment(
    amplitude_grid,
    shots: int | None = None,
    seed=0,
    drive_gain: float = 1.0,
    resonant_frequency: float | None = None,
) -> RabiData:
    """Simulate a Rabi amplitude sweep and extract the pi-pulse amplitude.

    The simulated qubit follows ``P(|1>) = sin^2(pi/2 * drive_gain * A)``;
    with ``shots`` set each point is replaced by a binomial estimate and the
    fit is weighted by the binomial standard error (add-one smoothed so
    points measured at exactly 0 or 1 keep a finite weight).  The pi
    amplitude is half the period of the fitted sinusoid, ``pi / eta``.
    """
    amps = np.asarray(amplitude_grid, dtype=float)
    if amps.ndim != 1:
        raise UsageError("amplitude grid must be 1-D")
    probs = probability_excited(drive_gain * amps)
    probs = np.atleast_1d(np.asarray(probs, dtype=float))
    sigma = None
    if shots is not None:
        cfg = MeasurementConfig(shots=shots, rng_seed=seed)
        counts = make_rng(seed).binomial(cfg.shots, np.clip(probs, 0.0, 1.0))
        probs = counts / cfg.shots
        smoothed = (counts + 1.0) / (cfg.shots + 2.0)
        sigma = np.sqrt(smoothed * (1.0 - smoothed) / cfg.shots)
    model, rms = fit_excitation(amps, probs, sigma)
    result = CalibrationResult(
        resonant_frequency=resonant_frequency,
        pi_amplitude=math.pi / model.eta,
        fit=model,
        fit_residual=rms,
    )
    return RabiData(amps, probs, result)


def write_curve_csv(path, xname: str, yname: str, xs, ys) -> Path:
    path = Path(path)
    lines = [f"{xname},{yname}"]
    lines += [f"{float(x)!r},{float(y)!r}" for x, y in zip(xs, ys)]
    path.write_text("\n".join(lines) + "\n")
    return path
