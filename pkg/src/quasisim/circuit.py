"""Circuit IR: gates, circuits, Pauli strings and the plain-text circuit format.

Qubit 0 is the most significant bit of basis labels, so ``|q0 q1 ... q(n-1)>``
reads left to right.

Text format, one instruction per line::

    # comment
    qubits 3
    h 0
    cnot 0 1
    u 2 re00 im00 re01 im01 re10 im10 re11 im11
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

USER_UNITARY_TOL = 1e-9
INTERNAL_UNITARY_TOL = 1e-12

_S2 = 1.0 / np.sqrt(2.0)
_T = np.exp(1j * np.pi / 4)

NAMED_GATES: dict[str, tuple[complex, complex, complex, complex]] = {
    "h": (_S2, _S2, _S2, -_S2),
    "x": (0, 1, 1, 0),
    "y": (0, -1j, 1j, 0),
    "z": (1, 0, 0, -1),
    "s": (1, 0, 0, 1j),
    "sdg": (1, 0, 0, -1j),
    "t": (1, 0, 0, _T),
    "tdg": (1, 0, 0, np.conj(_T)),
}

PAULI_LETTERS = "IXYZ"


class CircuitError(ValueError):
    """Invalid circuit structure (bad index, non-unitary matrix, ...)."""


class CircuitParseError(CircuitError):
    """Syntax error in circuit text; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PauliError(ValueError):
    pass


def _is_unitary(m: np.ndarray, tol: float) -> bool:
    return bool(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))) <= tol)


@dataclass(frozen=True)
class LocalUnitary:
    qubit: int
    name: str
    entries: tuple[complex, complex, complex, complex]  # row-major 2x2

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.entries, dtype=complex).reshape(2, 2)

    @classmethod
    def named(cls, name: str, qubit: int) -> "LocalUnitary":
        name = name.lower()
        if name not in NAMED_GATES:
            raise CircuitError(f"unknown gate {name!r}")
        return cls(qubit, name, tuple(complex(v) for v in NAMED_GATES[name]))

    @classmethod
    def custom(cls, qubit: int, matrix, tol: float = USER_UNITARY_TOL) -> "LocalUnitary":
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (2, 2):
            raise CircuitError(f"custom unitary must be 2x2, got {m.shape}")
        if not _is_unitary(m, tol):
            raise CircuitError("custom matrix is not unitary")
        return cls(qubit, "u", tuple(complex(v) for v in m.ravel()))


@dataclass(frozen=True)
class Cnot:
    control: int
    target: int


Gate = Union[LocalUnitary, Cnot]


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        validate_circuit(self)

    def __len__(self) -> int:
        return len(self.gates)

    @property
    def n_cnots(self) -> int:
        return cnot_count(self)


def validate_circuit(c: Circuit) -> None:
    if not isinstance(c.n_qubits, (int, np.integer)) or c.n_qubits < 1:
        raise CircuitError(f"n_qubits must be a positive integer, got {c.n_qubits!r}")
    n = c.n_qubits
    for k, g in enumerate(c.gates):
        if isinstance(g, Cnot):
            for q in (g.control, g.target):
                if not 0 <= q < n:
                    raise CircuitError(f"gate {k}: qubit {q} out of range for {n} qubits")
            if g.control == g.target:
                raise CircuitError(f"gate {k}: cnot control equals target ({g.control})")
        elif isinstance(g, LocalUnitary):
            if not 0 <= g.qubit < n:
                raise CircuitError(f"gate {k}: qubit {g.qubit} out of range for {n} qubits")
            tol = USER_UNITARY_TOL if g.name == "u" else INTERNAL_UNITARY_TOL
            if not _is_unitary(g.matrix, tol):
                raise CircuitError(f"gate {k}: matrix is not unitary")
        else:
            raise CircuitError(f"gate {k}: unsupported gate type {type(g).__name__}")


def cnot_count(c: Circuit) -> int:
    """Number of CNOT gates; the exponent of the 3^N sequence count."""
    return sum(1 for g in c.gates if isinstance(g, Cnot))


def _parse_int(tok: str, lineno: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise CircuitParseError(f"expected integer {what}, got {tok!r}", lineno) from None


def parse_circuit(text: str) -> Circuit:
    n_qubits = None
    gates: list[Gate] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        op = toks[0].lower()
        if n_qubits is None:
            if op != "qubits":
                raise CircuitParseError("missing 'qubits <n>' header", lineno)
            if len(toks) != 2:
                raise CircuitParseError("usage: qubits <n>", lineno)
            n_qubits = _parse_int(toks[1], lineno, "qubit count")
            if n_qubits < 1:
                raise CircuitParseError("qubit count must be positive", lineno)
            continue
        if op == "qubits":
            raise CircuitParseError("duplicate 'qubits' header", lineno)

        if op == "cnot":
            if len(toks) != 3:
                raise CircuitParseError("usage: cnot <control> <target>", lineno)
            ctl = _parse_int(toks[1], lineno, "control")
            tgt = _parse_int(toks[2], lineno, "target")
            _check_index(ctl, n_qubits, lineno)
            _check_index(tgt, n_qubits, lineno)
            if ctl == tgt:
                raise CircuitParseError(f"cnot control equals target ({ctl})", lineno)
            gates.append(Cnot(ctl, tgt))
        elif op == "u":
            if len(toks) != 10:
                raise CircuitParseError("usage: u <q> followed by 8 real numbers", lineno)
            q = _parse_int(toks[1], lineno, "qubit")
            _check_index(q, n_qubits, lineno)
            try:
                vals = [float(v) for v in toks[2:]]
            except ValueError:
                raise CircuitParseError("matrix entries must be real numbers", lineno) from None
            m = np.array([complex(vals[i], vals[i + 1]) for i in range(0, 8, 2)]).reshape(2, 2)
            try:
                gates.append(LocalUnitary.custom(q, m))
            except CircuitError as exc:
                raise CircuitParseError(str(exc), lineno) from None
        elif op in NAMED_GATES:
            if len(toks) != 2:
                raise CircuitParseError(f"usage: {op} <qubit>", lineno)
            q = _parse_int(toks[1], lineno, "qubit")
            _check_index(q, n_qubits, lineno)
            gates.append(LocalUnitary.named(op, q))
        else:
            raise CircuitParseError(f"unknown instruction {toks[0]!r}", lineno)

    if n_qubits is None:
        raise CircuitParseError("missing 'qubits <n>' header")
    return Circuit(n_qubits, tuple(gates))


def _check_index(q: int, n: int, lineno: int) -> None:
    if not 0 <= q < n:
        raise CircuitParseError(f"qubit {q} out of range for {n} qubits", lineno)


def render_circuit(c: Circuit) -> str:
    """Canonical text form; ``parse_circuit(render_circuit(c)) == c``."""
    lines = [f"qubits {c.n_qubits}"]
    for g in c.gates:
        if isinstance(g, Cnot):
            lines.append(f"cnot {g.control} {g.target}")
        elif g.name == "u":
            nums = []
            for z in g.entries:
                nums += [repr(float(z.real)), repr(float(z.imag))]
            lines.append(f"u {g.qubit} " + " ".join(nums))
        else:
            lines.append(f"{g.name} {g.qubit}")
    return "\n".join(lines) + "\n"


def load_circuit(path) -> Circuit:
    with open(path, encoding="utf-8") as fh:
        return parse_circuit(fh.read())


@dataclass(frozen=True)
class PauliString:
    letters: str

    def __post_init__(self):
        if not self.letters or any(ch not in PAULI_LETTERS for ch in self.letters):
            raise PauliError(f"invalid Pauli string {self.letters!r}")

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return self.letters

    @property
    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}


def parse_pauli(text: str, n: int, require_nonidentity: bool = True) -> PauliString:
    letters = text.strip().upper()
    if len(letters) != n:
        raise PauliError(f"Pauli string {text!r} has length {len(letters)}, expected {n}")
    bad = [ch for ch in letters if ch not in PAULI_LETTERS]
    if bad:
        raise PauliError(f"invalid Pauli letter {bad[0]!r} in {text!r}")
    p = PauliString(letters)
    if require_nonidentity and p.is_identity:
        raise PauliError("parity observable needs at least one non-identity letter")
    return p


def ghz_circuit(n_qubits: int = 3) -> Circuit:
    """Hadamard on qubit 0 followed by CNOTs fanning out from qubit 0."""
    gates: list[Gate] = [LocalUnitary.named("h", 0)]
    gates += [Cnot(0, k) for k in range(1, n_qubits)]
    return Circuit(n_qubits, tuple(gates))


def iter_cnots(c: Circuit) -> Iterable[Cnot]:
    return (g for g in c.gates if isinstance(g, Cnot))
