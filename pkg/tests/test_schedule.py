import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import circuit_outputs
from perthro.block import PerthroBlock
from perthro.circuit import Circuit, Head, circuit_forward
from perthro.errors import ScheduleError, VerificationError
from perthro.pulses import CalibrationResult
from perthro.qubit import make_rng, probability_excited
from perthro.schedule import (
    PulseSchedule,
    calibration_ref,
    chunk_block,
    compile_batch,
    compile_schedule,
    simulate_schedule,
    validate_schedule,
    verify_schedule,
    wrap_amplitude,
)

HALF_PI = math.pi / 2
XOR_CIRCUIT = Circuit([PerthroBlock([[HALF_PI, HALF_PI], [0, 0]], [HALF_PI, HALF_PI])], Head.threshold())
CAL = CalibrationResult(resonant_frequency=4.97e9, pi_amplitude=1.0)


def test_two_pulse_block_is_one_train():
    trains = chunk_block([0.3, 2.7])
    assert len(trains) == 1
    assert trains[0].amplitudes == pytest.approx([0.3, 0.7])
    assert not trains[0].reset_after
    assert trains[0].carry_offset_in == 0.0


def test_six_pulse_block_carries_first_four():
    raw = np.array([0.4, 0.9, 1.3, -0.2, 0.5, 0.6])
    trains = chunk_block(raw)
    assert [len(t.amplitudes) for t in trains] == [4, 2]
    assert trains[0].reset_after and not trains[1].reset_after
    assert trains[1].carry_offset_in == pytest.approx(np.sum(raw[:4]) % 2)
    assert trains[1].pulses[0] == pytest.approx((raw[4] + np.sum(raw[:4])) % 2)


def test_twelve_pulses_three_trains():
    trains = chunk_block(np.linspace(0.1, 1.2, 12))
    assert [len(t.amplitudes) for t in trains] == [4, 4, 4]
    assert [t.reset_after for t in trains] == [True, True, False]


@settings(max_examples=1000, deadline=None)
@given(st.floats(-50, 50, allow_nan=False), st.integers(-20, 20))
def test_wrapping_keeps_probabilities(a, k):
    w = wrap_amplitude(a + 2 * k)
    assert 0.0 <= w < 2.0
    assert abs(probability_excited(w) - probability_excited(a)) <= 1e-12


@pytest.mark.parametrize("x", [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_xor_schedule_matches_forward(x):
    sched = compile_schedule(XOR_CIRCUIT, x, CAL)
    assert len(sched.blocks[0].trains) == 1
    z_sched = simulate_schedule(sched)[0]
    np.testing.assert_allclose(z_sched, circuit_forward(XOR_CIRCUIT, x)[0], atol=1e-12)
    assert verify_schedule(sched, XOR_CIRCUIT) <= 1e-12


def _random_circuit(rng, max_n=16):
    d = int(rng.integers(1, 5))
    sizes = [int(v) for v in rng.integers(1, max_n + 1, size=rng.integers(1, 4))]
    c = Circuit.initialized(d, sizes, init_scale=3.0, seed=int(rng.integers(1 << 31)))
    for blk in c.blocks:
        blk.biases[:] = rng.uniform(-3, 3, blk.biases.shape)
    return c, rng.uniform(0, 1, d)


def test_chunking_equivalence_against_scalar_oracle():
    rng = make_rng(21)
    for _ in range(30):
        c, x = _random_circuit(rng)
        sched = compile_schedule(c, x, CAL)
        np.testing.assert_allclose(simulate_schedule(sched)[-1], circuit_outputs(c, x), atol=1e-12)


def test_corrupted_carry_detected():
    rng = make_rng(4)
    blk = PerthroBlock(rng.uniform(-2, 2, (6, 2)), rng.uniform(-2, 2, 6))
    c = Circuit([blk])
    sched = compile_schedule(c, [0.3, 0.8], CAL)
    sched.blocks[0].trains[1].carry_offset_in = wrap_amplitude(sched.blocks[0].trains[1].carry_offset_in + 0.3)
    with pytest.raises(ScheduleError):
        validate_schedule(sched)
    with pytest.raises(ScheduleError):
        verify_schedule(sched, c)


def test_consistently_corrupted_program_fails_verification():
    c = Circuit([PerthroBlock(np.full((6, 1), 0.4), np.full(6, 0.2))])
    sched = compile_schedule(c, [0.5], CAL)
    t = sched.blocks[0].trains[1]
    # shift the carry and the pulse it folds into together: structurally valid, physically wrong
    t.carry_offset_in = wrap_amplitude(t.carry_offset_in + 0.25)
    t.pulses[0] = wrap_amplitude(t.pulses[0] + 0.25)
    sched.blocks[0].trains[0].amplitudes[0] = wrap_amplitude(sched.blocks[0].trains[0].amplitudes[0] + 0.25)
    sched.blocks[0].trains[0].pulses[0] = wrap_amplitude(sched.blocks[0].trains[0].pulses[0] + 0.25)
    validate_schedule(sched)
    with pytest.raises(VerificationError):
        verify_schedule(sched, c)


def test_empty_schedule():
    sched = PulseSchedule(calibration_ref(CAL), {"amplitude_scale": 1.0}, [], [])
    assert simulate_schedule(sched) == []


def test_malformed_schedules():
    sched = compile_schedule(XOR_CIRCUIT, (0, 1), CAL)
    bad = PulseSchedule.from_json(sched.to_json())
    bad.blocks[0].trains[0].pulses.extend([0.1] * 4)
    bad.blocks[0].trains[0].amplitudes.extend([0.1] * 4)
    with pytest.raises(ScheduleError, match="1-4 pulses"):
        validate_schedule(bad)
    bad = PulseSchedule.from_json(sched.to_json())
    bad.version = 99
    with pytest.raises(ScheduleError, match="version"):
        validate_schedule(bad)
    with pytest.raises(ScheduleError):
        PulseSchedule.from_json('{"version": 1}')
    with pytest.raises(ScheduleError):
        PulseSchedule.from_json("[1, 2")


def test_compile_requires_calibration():
    with pytest.raises(ScheduleError):
        compile_schedule(XOR_CIRCUIT, (0, 0), None)
    with pytest.raises(ScheduleError):
        compile_schedule(XOR_CIRCUIT, (0, 0), CalibrationResult(resonant_frequency=4.97e9))


def test_verify_rejects_other_input_or_circuit():
    sched = compile_schedule(XOR_CIRCUIT, (0, 1), CAL)
    with pytest.raises(VerificationError):
        verify_schedule(sched, XOR_CIRCUIT, (1, 1))
    other = Circuit([PerthroBlock([[0.3, 0.1], [0.2, 0.2]], [0.0, 0.4])], Head.threshold())
    with pytest.raises(VerificationError):
        verify_schedule(sched, other)


def test_json_round_trip_is_byte_identical(tmp_path):
    rng = make_rng(8)
    for _ in range(10):
        c, x = _random_circuit(rng)
        text = compile_schedule(c, x, CAL).to_json()
        assert PulseSchedule.from_json(text).to_json() == text
    path = compile_schedule(XOR_CIRCUIT, (1, 0), CAL).save(tmp_path / "s.json")
    assert PulseSchedule.load(path).to_json() == path.read_text()


def test_schema_fields():
    d = compile_schedule(XOR_CIRCUIT, (1, 0), CAL).to_dict()
    assert d["version"] == 1
    assert d["calibration_ref"] == calibration_ref(CAL)
    assert {"amplitude_scale", "width_s", "center_s"} <= set(d["pulse_template"])
    assert set(d["blocks"][0]["trains"][0]) == {"amplitudes", "carry_offset_in", "pulses", "reset_after"}


def test_iris_circuit_resets():
    c = Circuit.initialized(4, [6, 12, 3], Head.softmax(3), seed=0)
    sched = compile_schedule(c, [0.1, 0.2, 0.3, 0.4], CAL)
    resets = [sum(t.reset_after for t in b.trains) for b in sched.blocks]
    assert resets == [1, 2, 0]


def test_batch_compile():
    X = [(0, 0), (1, 1)]
    scheds = compile_batch(XOR_CIRCUIT, X, CAL)
    assert [s.input for s in scheds] == [[0.0, 0.0], [1.0, 1.0]]
