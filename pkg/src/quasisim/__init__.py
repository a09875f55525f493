"""Quasi-probability simulation of CNOT circuits with signed local operations."""
from .circuit import (
    Circuit,
    CircuitError,
    CircuitParseError,
    Cnot,
    LocalUnitary,
    PauliString,
    cnot_count,
    ghz_circuit,
    parse_circuit,
    parse_pauli,
    render_circuit,
)
from .quasiprob import (
    BudgetExceeded,
    LocalOperation,
    ProductState,
    QuasiEstimate,
    decompose_cnot,
    enumerate_sequences,
    overhead_ratio,
    sample,
    sequence_census,
    sequence_sign,
)

__version__ = "0.1.0"
