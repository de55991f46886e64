"""Single-qubit Perthro feed-forward blocks.

A Perthro block drives one qubit with a train of amplitude-modulated pulses;
the probability of ``|1>`` read after pulse ``i`` behaves like a neuron with
a sine-squared activation whose argument accumulates every earlier pulse.
"""

__version__ = "0.1.0"

from .block import PerthroBlock, backward, forward, forward_via_pulse_sim, modulate_amplitudes
from .circuit import Circuit, Head, circuit_forward, count_parameters, softmax_head, xor_head
from .datasets import Dataset, load_csv, split, xor_dataset
from .pulses import CalibrationResult, GaussianPulse, PulseTrain, frequency_sweep, rabi_experiment
from .qubit import MeasurementConfig, QubitState, apply_pulse, probability_excited, sample_shots
from .schedule import PulseSchedule, compile_schedule, simulate_schedule, verify_schedule
from .training import TrainConfig, TrainReport, evaluate, loss, train
