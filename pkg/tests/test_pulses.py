import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perthro.errors import CalibrationError, UsageError
from perthro.pulses import (
    CalibrationResult,
    GaussianPulse,
    PulseTrain,
    envelope,
    fit_excitation,
    frequency_sweep,
    rabi_experiment,
)
from perthro.qubit import ExcitationModel

RABI_GRID = np.linspace(0.0, 2.0, 41)


def test_envelope_examples():
    # the profile is centred on duration_center, with width as its standard deviation
    p = GaussianPulse(amplitude=0.7, duration_center=5e9, width=2e6)
    assert envelope(p, 5e9) == pytest.approx(0.7)
    assert envelope(p, 5e9 + 2e6) == pytest.approx(0.7 * math.exp(-0.5))
    assert envelope(p, 1e15) == pytest.approx(0.0, abs=1e-300)
    assert envelope(p, -1e15) == pytest.approx(0.0, abs=1e-300)


@given(st.floats(0, 5e6))
def test_envelope_symmetric_and_monotone(delta):
    p = GaussianPulse(duration_center=5e9, width=1e6)
    assert envelope(p, 5e9 + delta) == pytest.approx(envelope(p, 5e9 - delta), rel=1e-12)
    assert envelope(p, 5e9 + delta) >= envelope(p, 5e9 + delta + 1e5)


def test_pulse_train_probabilities():
    train = PulseTrain([0.25, 0.25, 0.5])
    np.testing.assert_allclose(train.cumulative(), [0.25, 0.5, 1.0])
    np.testing.assert_allclose(train.probabilities(), np.sin(np.pi / 2 * np.array([0.25, 0.5, 1.0])) ** 2)


# -- frequency sweep -------------------------------------------------------------

F0 = 4.97e9
GRID = np.linspace(F0 - 5e7, F0 + 5e7, 101)
STEP = GRID[1] - GRID[0]


def test_sweep_on_grid_noiseless():
    est = frequency_sweep(F0, GRID).result.resonant_frequency
    # exact up to floating-point resolution at 5 GHz
    assert est == pytest.approx(F0, rel=1e-12)


def test_sweep_mid_grid_noiseless():
    truth = F0 + 0.5 * STEP
    est = frequency_sweep(truth, GRID).result.resonant_frequency
    assert abs(est - truth) <= 0.5 * STEP


def test_sweep_noisy_repeats():
    for seed in range(100):
        est = frequency_sweep(F0, GRID, noise_sigma=0.05, seed=seed).result.resonant_frequency
        assert abs(est - F0) <= 2 * STEP


def test_sweep_rejects_bad_grids():
    with pytest.raises(UsageError):
        frequency_sweep(F0, [])
    with pytest.raises(UsageError):
        frequency_sweep(F0, GRID[::-1])


# -- Rabi fit ----------------------------------------------------------------------


def test_rabi_noiseless():
    assert rabi_experiment(RABI_GRID).result.pi_amplitude == pytest.approx(1.0, abs=1e-6)


def test_rabi_drive_gain():
    # half the gain needs twice the amplitude
    grid = np.linspace(0, 4, 81)
    assert rabi_experiment(grid, drive_gain=0.5).result.pi_amplitude == pytest.approx(2.0, abs=1e-6)


def test_rabi_with_shots():
    for seed in range(20):
        pi_amp = rabi_experiment(RABI_GRID, shots=1024, seed=seed).result.pi_amplitude
        assert abs(pi_amp - 1.0) <= 0.01


def test_constant_response_is_degenerate():
    with pytest.raises(CalibrationError):
        fit_excitation(RABI_GRID, np.zeros_like(RABI_GRID))


def test_short_grid_rejected():
    with pytest.raises(CalibrationError):
        fit_excitation([0.0, 0.5, 1.0], [0.0, 0.5, 1.0])
    # a quarter oscillation cannot pin the period
    grid = np.linspace(0, 0.5, 20)
    with pytest.raises(CalibrationError):
        fit_excitation(grid, np.sin(np.pi / 2 * grid) ** 2)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.5, 1.0),
    st.floats(0.5, 2.0),
    st.floats(0.0, 0.5),
    st.floats(-math.pi, math.pi),
)
def test_fit_round_trip(a, eta, c, phase):
    truth = ExcitationModel(eta=eta, a=a, c=c, phase=phase)
    # wide enough for the slowest eta to complete two oscillations
    grid = np.linspace(0, 4 * math.pi, 201)
    fit, rms = fit_excitation(grid, truth(grid))
    assert fit.eta == pytest.approx(eta, rel=0.01)
    assert fit.a == pytest.approx(a, rel=0.01)
    assert fit.c == pytest.approx(c, rel=0.01, abs=1e-6)
    assert rms < 1e-6


def test_calibration_json_round_trip(tmp_path):
    result = rabi_experiment(RABI_GRID, resonant_frequency=F0).result
    path = result.save(tmp_path / "cal.json")
    text = path.read_text()
    for key in ("resonant_frequency_hz", "pi_amplitude", "fit", "residual"):
        assert f'"{key}"' in text
    assert CalibrationResult.load(path) == result


def test_calibration_invariants(tmp_path):
    with pytest.raises(CalibrationError):
        CalibrationResult(F0, pi_amplitude=-1.0)
    with pytest.raises(CalibrationError):
        CalibrationResult(F0, fit_residual=-0.1)
    with pytest.raises(CalibrationError):
        CalibrationResult.load(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(CalibrationError):
        CalibrationResult.load(tmp_path / "bad.json")
