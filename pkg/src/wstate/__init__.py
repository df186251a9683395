"""Perfect W-state generation, tomography, Mermin tests and information splitting."""
from .circuit import (
    Circuit,
    Operation,
    general_w_state,
    maximal_w_state,
    message_prep_circuit,
    perfect_w_circuit,
    perfect_w_state,
    run,
    sample_circuit,
)
from .noise import NoiseModel
from .statevec import (
    StateVector,
    apply_gate,
    expectation,
    fidelity,
    measure_qubit,
    partial_trace,
    probabilities,
    sample_counts,
    u3_matrix,
    zero_state,
)

__version__ = "0.1.0"

__all__ = [
    "Circuit",
    "NoiseModel",
    "Operation",
    "StateVector",
    "apply_gate",
    "expectation",
    "fidelity",
    "general_w_state",
    "maximal_w_state",
    "measure_qubit",
    "message_prep_circuit",
    "partial_trace",
    "perfect_w_circuit",
    "perfect_w_state",
    "probabilities",
    "run",
    "sample_circuit",
    "sample_counts",
    "u3_matrix",
    "zero_state",
]
