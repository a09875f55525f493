"""Dense state-vector / density-matrix oracle.

States are plain numpy arrays: a state vector has length 2**n, a density
matrix is 2**n x 2**n. Qubit 0 is the most significant bit.

Process matrices use the *unnormalized* two-qubit Pauli products
(eigenvalues +-1) as operator basis, ordered II, IX, IY, IZ, XI, ..., ZZ with
the first letter acting on the first (control) qubit. Under this convention

    E(rho) = sum_ij chi[i, j] P_i rho P_j^dagger

and a Kraus operator K = sum_i c_i P_i has c_i = tr(P_i K) / 4, so the CNOT
coefficients are the literal 1/2 of its Pauli expansion and chi entries are 1/4.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import Circuit, Cnot, LocalUnitary, PauliString

MAX_DENSE_QUBITS = 12
IMAG_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

PAULI_PAIR_LABELS = tuple(a + b for a, b in itertools.product("IXYZ", repeat=2))
PAULI_PAIR_BASIS = tuple(np.kron(PAULI[a], PAULI[b]) for a, b in PAULI_PAIR_LABELS)

CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Channel:
    """Signed-weight operator-sum map on the named qubits.

    Each branch is ``(operator, weight)``; the operator acts on ``qubits`` in
    the listed order (first listed qubit is the most significant factor).
    """

    qubits: tuple[int, ...]
    branches: tuple[tuple[np.ndarray, float], ...]

    def scaled(self, factor: float) -> "Channel":
        return Channel(self.qubits, tuple((k, w * factor) for k, w in self.branches))

    def __add__(self, other: "Channel") -> "Channel":
        if self.qubits != other.qubits:
            raise DimensionError("cannot add channels on different qubits")
        return Channel(self.qubits, self.branches + other.branches)

    def __sub__(self, other: "Channel") -> "Channel":
        return self + other.scaled(-1.0)

    def completeness_residual(self) -> float:
        """max |sum_k w_k K_k^dag K_k - I|; meaningful for positive channels."""
        d = 2 ** len(self.qubits)
        acc = sum(w * k.conj().T @ k for k, w in self.branches)
        return float(np.max(np.abs(acc - np.eye(d))))


def identity_channel(qubits: Sequence[int] = (0, 1)) -> Channel:
    d = 2 ** len(qubits)
    return Channel(tuple(qubits), ((np.eye(d, dtype=complex), 1.0),))


def cnot_channel() -> Channel:
    """CNOT built from its Pauli expansion (II + ZI + IX - ZX) / 2."""
    u = 0.5 * (
        np.kron(I2, I2) + np.kron(Z, I2) + np.kron(I2, X) - np.kron(Z, X)
    )
    if np.max(np.abs(u - CNOT_MATRIX)) > 1e-15:
        raise AssertionError("Pauli expansion of CNOT does not match its permutation matrix")
    return Channel((0, 1), ((u, 1.0),))


def _n_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or 2**n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


def _apply_op_tensor(op: np.ndarray, qubits: Sequence[int], tensor: np.ndarray, axis0: int = 0):
    """Contract ``op`` (2^m x 2^m) into the given qubit axes of a rank-n(+) tensor."""
    m = len(qubits)
    opt = op.reshape((2,) * (2 * m))
    axes = [axis0 + q for q in qubits]
    out = np.tensordot(opt, tensor, axes=(list(range(m, 2 * m)), axes))
    return np.moveaxis(out, list(range(m)), axes)


def apply_gate(state: np.ndarray, gate, n: int) -> np.ndarray:
    t = state.reshape((2,) * n)
    if isinstance(gate, Cnot):
        t = _apply_op_tensor(CNOT_MATRIX, (gate.control, gate.target), t)
    elif isinstance(gate, LocalUnitary):
        t = _apply_op_tensor(gate.matrix, (gate.qubit,), t)
    else:
        raise TypeError(f"unsupported gate {gate!r}")
    return t.reshape(-1)


def run_exact(c: Circuit, state: np.ndarray) -> np.ndarray:
    psi = np.asarray(state, dtype=complex)
    if psi.ndim != 1 or psi.shape[0] != 2**c.n_qubits:
        raise DimensionError(
            f"input has shape {psi.shape}, circuit needs length {2 ** c.n_qubits}"
        )
    if c.n_qubits > MAX_DENSE_QUBITS:
        raise DimensionError(f"dense oracle is capped at {MAX_DENSE_QUBITS} qubits")
    for g in c.gates:
        psi = apply_gate(psi, g, c.n_qubits)
    return psi


def basis_state(bits: str) -> np.ndarray:
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[int(bits, 2)] = 1.0
    return psi


def density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def apply_channel(ch: Channel, rho: np.ndarray, n_qubits: int | None = None) -> np.ndarray:
    """sum_k w_k K_k rho K_k^dag, embedded on ``ch.qubits`` of the register."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got {rho.shape}")
    n = _n_qubits_of(rho.shape[0]) if n_qubits is None else n_qubits
    if rho.shape[0] != 2**n:
        raise DimensionError("n_qubits does not match density matrix size")
    m = len(ch.qubits)
    if any(not 0 <= q < n for q in ch.qubits):
        raise DimensionError(f"channel qubits {ch.qubits} out of range for {n} qubits")
    t = rho.reshape((2,) * (2 * n))
    out = np.zeros_like(t)
    for k, w in ch.branches:
        if k.shape != (2**m, 2**m):
            raise DimensionError(f"Kraus operator shape {k.shape} does not match {m} qubits")
        left = _apply_op_tensor(k, ch.qubits, t, axis0=0)
        out += w * _apply_op_tensor(k.conj(), ch.qubits, left, axis0=n)
    return out.reshape(rho.shape)


def pauli_coefficients(k: np.ndarray) -> np.ndarray:
    """c_i with K = sum_i c_i P_i over the unnormalized two-qubit Pauli basis."""
    return np.array([np.trace(p.conj().T @ k) / 4.0 for p in PAULI_PAIR_BASIS])


def chi_of_channel(ch: Channel) -> np.ndarray:
    if len(ch.qubits) != 2 or any(k.shape != (4, 4) for k, _ in ch.branches):
        raise DimensionError("process matrices are defined for two-qubit channels only")
    chi = np.zeros((16, 16), dtype=complex)
    for k, w in ch.branches:
        c = pauli_coefficients(k)
        chi += w * np.outer(c, c.conj())
    return chi


def apply_chi(chi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Reconstruct the channel action sum_ij chi_ij P_i rho P_j^dag on two qubits."""
    out = np.zeros((4, 4), dtype=complex)
    for i, pi in enumerate(PAULI_PAIR_BASIS):
        left = pi @ rho
        for j, pj in enumerate(PAULI_PAIR_BASIS):
            if chi[i, j] != 0:
                out += chi[i, j] * left @ pj.conj().T
    return out


def chi_support(chi: np.ndarray, tol: float = 1e-12) -> list[str]:
    """Labels of basis operators with a nonzero diagonal chi entry."""
    return [PAULI_PAIR_LABELS[i] for i in range(16) if abs(chi[i, i]) > tol]


def pauli_operator(p: PauliString) -> np.ndarray:
    op = np.array([[1.0 + 0j]])
    for ch in p.letters:
        op = np.kron(op, PAULI[ch])
    return op


def _real(value: complex, what: str) -> float:
    if abs(value.imag) > IMAG_TOL:
        raise ArithmeticError(f"{what} has imaginary part {value.imag:.3e}")
    return float(value.real)


def pauli_expectation(state: np.ndarray, p: PauliString) -> float:
    psi = np.asarray(state, dtype=complex)
    n = len(p)
    if psi.shape != (2**n,):
        raise DimensionError(f"state length {psi.shape} does not match {n}-qubit observable")
    t = psi.reshape((2,) * n)
    for q, ch in enumerate(p.letters):
        if ch != "I":
            t = _apply_op_tensor(PAULI[ch], (q,), t)
    return _real(np.vdot(psi, t.reshape(-1)), "Pauli expectation")


def parity_probability(state: np.ndarray, p: PauliString, parity: int) -> float:
    """Probability that the product of per-qubit outcomes of ``p`` equals ``parity``."""
    if p.is_identity:
        raise ValueError("parity observable needs at least one non-identity letter")
    if parity not in (1, -1):
        raise ValueError(f"parity must be +1 or -1, got {parity}")
    e = pauli_expectation(state, p)
    return min(1.0, max(0.0, 0.5 * (1.0 + parity * e)))


def is_density_matrix(rho: np.ndarray, tol: float = 1e-12) -> bool:
    herm = np.max(np.abs(rho - rho.conj().T)) <= tol
    tr = abs(np.trace(rho) - 1.0) <= tol
    pos = np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) >= -1e-10
    return bool(herm and tr and pos)
