"""Compile circuits into hardware-style pulse schedules and replay them.

Pulse-level backends accept at most four pulses per train, so a block with
more pulses is split into trains of up to four with a qubit reset between
them.  The rotation accumulated before a reset is carried into the next
train by adding it (mod 2, the period of ``sin^2(pi/2 * A)``) to that
train's first pulse; every probability read after a pulse is therefore the
same as in the unsplit train.

A schedule depends on the input sample because each pulse amplitude contains
``<w_i, x>``; blocks after the first are compiled for the noiseless outputs
of the block before them.

Schedule JSON (``version`` 1)::

    {
      "version": 1,
      "calibration_ref": "<sha256 prefix of the calibration record>",
      "pulse_template": {"amplitude_scale": <pi-pulse drive amplitude>,
                         "width_s": ..., "center_s": ..., "frequency_hz": ...},
      "input": [x_1, ..., x_d],
      "blocks": [
        {"qubit_index": 0,
         "trains": [
           {"amplitudes": [...],      # modulated amplitudes wrapped to [0, 2)
            "carry_offset_in": c,     # rotation carried from earlier trains, in [0, 2)
            "pulses": [...],          # emitted program: amplitudes with c folded into the first
            "reset_after": true}]}]
    }

Amplitudes are in pi-pulse units; the drive amplitude sent to hardware is
``amplitude_scale * pulse``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .block import modulate_amplitudes
from .circuit import Circuit, circuit_forward
from .errors import ScheduleError, VerificationError
from .pulses import CalibrationResult, GaussianPulse
from .qubit import QubitState, apply_pulse

SCHEDULE_VERSION = 1
MAX_PULSES_PER_TRAIN = 4
AMPLITUDE_PERIOD = 2.0
VERIFY_TOLERANCE = 1e-12
_CONSISTENCY_TOLERANCE = 1e-9


def wrap_amplitude(a):
    """Reduce amplitudes into ``[0, 2)``; probabilities are unchanged."""
    r = np.mod(np.asarray(a, dtype=float), AMPLITUDE_PERIOD)
    r = np.where(r >= AMPLITUDE_PERIOD, 0.0, r)
    return float(r) if r.ndim == 0 else r


def _circular_gap(a, b):
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float) + 1.0, AMPLITUDE_PERIOD) - 1.0
    return np.abs(d)


def calibration_ref(calibration: CalibrationResult) -> str:
    canonical = json.dumps(calibration.to_dict(), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canonical.encode()).hexdigest()[:16]


@dataclass
class PulseTrainProgram:
    amplitudes: list
    carry_offset_in: float
    pulses: list
    reset_after: bool

    def to_dict(self) -> dict:
        return {
            "amplitudes": [float(a) for a in self.amplitudes],
            "carry_offset_in": float(self.carry_offset_in),
            "pulses": [float(p) for p in self.pulses],
            "reset_after": bool(self.reset_after),
        }


@dataclass
class BlockProgram:
    qubit_index: int
    trains: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"qubit_index": self.qubit_index, "trains": [t.to_dict() for t in self.trains]}


@dataclass
class PulseSchedule:
    calibration_ref: str
    pulse_template: dict
    input: list
    blocks: list = field(default_factory=list)
    version: int = SCHEDULE_VERSION

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "calibration_ref": self.calibration_ref,
            "pulse_template": dict(self.pulse_template),
            "input": [float(v) for v in self.input],
            "blocks": [b.to_dict() for b in self.blocks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSchedule":
        try:
            blocks = [
                BlockProgram(
                    int(b["qubit_index"]),
                    [
                        PulseTrainProgram(
                            [float(a) for a in t["amplitudes"]],
                            float(t["carry_offset_in"]),
                            [float(p) for p in t["pulses"]],
                            bool(t["reset_after"]),
                        )
                        for t in b["trains"]
                    ],
                )
                for b in data["blocks"]
            ]
            return cls(
                calibration_ref=str(data["calibration_ref"]),
                pulse_template={k: float(v) for k, v in data["pulse_template"].items()},
                input=[float(v) for v in data["input"]],
                blocks=blocks,
                version=int(data["version"]),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ScheduleError(f"malformed schedule: {exc!r}") from exc

    @classmethod
    def from_json(cls, text: str) -> "PulseSchedule":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScheduleError(f"schedule is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ScheduleError("schedule JSON must be an object")
        return cls.from_dict(data)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path

    @classmethod
    def load(cls, path) -> "PulseSchedule":
        try:
            return cls.from_json(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ScheduleError(f"schedule file not found: {path}") from exc


def chunk_block(amplitudes) -> list[PulseTrainProgram]:
    """Split one block's raw amplitudes into trains of at most four pulses."""
    raw = np.asarray(amplitudes, dtype=float)
    trains = []
    for start in range(0, raw.size, MAX_PULSES_PER_TRAIN):
        chunk = wrap_amplitude(raw[start : start + MAX_PULSES_PER_TRAIN])
        carry = wrap_amplitude(np.sum(raw[:start])) if start else 0.0
        pulses = chunk.copy()
        pulses[0] = wrap_amplitude(chunk[0] + carry)
        trains.append(
            PulseTrainProgram(
                amplitudes=chunk.tolist(),
                carry_offset_in=float(carry),
                pulses=pulses.tolist(),
                reset_after=start + MAX_PULSES_PER_TRAIN < raw.size,
            )
        )
    return trains


def compile_schedule(
    circuit: Circuit,
    x,
    calibration: CalibrationResult | None,
    template: GaussianPulse | None = None,
) -> PulseSchedule:
    if calibration is None or calibration.pi_amplitude is None:
        raise ScheduleError("a Rabi calibration (pi amplitude) is required to compile a schedule")
    if template is None:
        template = GaussianPulse(
            frequency=calibration.resonant_frequency or GaussianPulse().frequency,
            duration_center=8.0e-8,
            width=2.0e-8,
        )
    x = np.asarray(x, dtype=float)
    _, traces = circuit_forward(circuit, x)
    blocks, inputs = [], x
    for k, (b, trace) in enumerate(zip(circuit.blocks, traces)):
        blocks.append(BlockProgram(k, chunk_block(modulate_amplitudes(b, inputs))))
        inputs = trace.output
    return PulseSchedule(
        calibration_ref=calibration_ref(calibration),
        pulse_template={
            "amplitude_scale": float(calibration.pi_amplitude),
            "width_s": template.width,
            "center_s": template.duration_center,
            "frequency_hz": template.frequency,
        },
        input=x.tolist(),
        blocks=blocks,
    )


def compile_batch(circuit: Circuit, X, calibration: CalibrationResult, template: GaussianPulse | None = None):
    return [compile_schedule(circuit, x, calibration, template) for x in np.asarray(X, dtype=float)]


def validate_schedule(schedule: PulseSchedule) -> None:
    """Check structural invariants and the carry bookkeeping of every block."""
    if schedule.version != SCHEDULE_VERSION:
        raise ScheduleError(f"unsupported schedule version {schedule.version}")
    if "amplitude_scale" not in schedule.pulse_template or not schedule.pulse_template["amplitude_scale"] > 0:
        raise ScheduleError("pulse_template.amplitude_scale must be positive")
    for b in schedule.blocks:
        where = f"block {b.qubit_index}"
        if not b.trains:
            raise ScheduleError(f"{where} has no trains")
        expected_carry = 0.0
        for t, train in enumerate(b.trains):
            where_t = f"{where} train {t}"
            amps = np.asarray(train.amplitudes, dtype=float)
            pulses = np.asarray(train.pulses, dtype=float)
            if not 1 <= amps.size <= MAX_PULSES_PER_TRAIN or pulses.size != amps.size:
                raise ScheduleError(f"{where_t} must hold 1-{MAX_PULSES_PER_TRAIN} pulses")
            values = np.concatenate([amps, pulses, [train.carry_offset_in]])
            if not np.all(np.isfinite(values)) or np.any(values < 0) or np.any(values >= AMPLITUDE_PERIOD):
                raise ScheduleError(f"{where_t} has amplitudes outside [0, 2)")
            if _circular_gap(train.carry_offset_in, expected_carry) > _CONSISTENCY_TOLERANCE:
                raise ScheduleError(
                    f"{where_t} carry offset {train.carry_offset_in!r} does not match the "
                    f"accumulated rotation {expected_carry!r}"
                )
            if _circular_gap(pulses[0], amps[0] + train.carry_offset_in) > _CONSISTENCY_TOLERANCE or np.any(
                pulses[1:] != amps[1:]
            ):
                raise ScheduleError(f"{where_t} pulses do not match amplitudes plus carry")
            last = t == len(b.trains) - 1
            if train.reset_after == last:
                raise ScheduleError(f"{where_t} reset marker misplaced")
            expected_carry = wrap_amplitude(train.carry_offset_in + np.sum(amps))


def simulate_schedule(schedule: PulseSchedule) -> list[np.ndarray]:
    """Replay a schedule on the qubit simulator.

    Every train starts from a freshly reset qubit; ``P(|1>)`` is read after
    each pulse.  Returns one probability vector per block.
    """
    validate_schedule(schedule)
    outputs = []
    for b in schedule.blocks:
        z = []
        for train in b.trains:
            state = QubitState.ground()
            for amplitude in train.pulses:
                state = apply_pulse(state, amplitude)
                z.append(state.probability_excited())
        outputs.append(np.asarray(z))
    return outputs


def verify_schedule(schedule: PulseSchedule, circuit: Circuit, x=None, tolerance: float = VERIFY_TOLERANCE) -> float:
    """Check a schedule reproduces the circuit's block outputs; returns the max deviation.

    Raises :class:`VerificationError` on any mismatch.
    """
    x = np.asarray(schedule.input if x is None else x, dtype=float)
    if x.shape != (len(schedule.input),) or not np.allclose(x, schedule.input, rtol=0, atol=0):
        raise VerificationError("schedule was compiled for a different input")
    if len(schedule.blocks) != len(circuit.blocks):
        raise VerificationError(f"schedule has {len(schedule.blocks)} blocks, circuit has {len(circuit.blocks)}")
    simulated = simulate_schedule(schedule)
    _, traces = circuit_forward(circuit, x)
    worst = 0.0
    for k, (z_sim, trace) in enumerate(zip(simulated, traces)):
        if z_sim.shape != trace.output.shape:
            raise VerificationError(f"block {k}: schedule yields {z_sim.size} outputs, circuit {trace.output.size}")
        gap = float(np.max(np.abs(z_sim - trace.output)))
        worst = max(worst, gap)
        if gap > tolerance:
            raise VerificationError(f"block {k}: schedule deviates from the circuit by {gap:.3e}")
    return worst
