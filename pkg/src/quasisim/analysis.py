"""GHZ golden experiment and the minimal-negativity check for the CNOT decomposition."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .circuit import PauliString, ghz_circuit
from .exact import apply_channel, density
from .quasiprob import (
    EnumerationResult,
    ProductState,
    decompose_cnot,
    enumerate_sequences,
    observable_label,
)

GHZ_OBSERVABLES = (
    (PauliString("XXX"), +1),
    (PauliString("XYY"), -1),
    (PauliString("YXY"), -1),
    (PauliString("YYX"), -1),
)


@dataclass(frozen=True)
class ClassicalFrequency:
    observable: str
    p_pos: float
    p_neg: float
    amplification: int
    reconstruction: float

    def as_fractions(self) -> tuple[Fraction, Fraction]:
        return (
            Fraction(self.p_pos).limit_denominator(3**8),
            Fraction(self.p_neg).limit_denominator(3**8),
        )


@dataclass(frozen=True)
class GhzReport:
    enumeration: EnumerationResult
    classical: tuple[ClassicalFrequency, ...]

    @property
    def rows(self):
        return self.enumeration.rows

    @property
    def recombined(self) -> tuple[float, ...]:
        return self.enumeration.totals

    @property
    def observables(self) -> tuple[str, ...]:
        return tuple(observable_label(o) for o in self.enumeration.observables)


def ghz_enumeration() -> EnumerationResult:
    c = ghz_circuit(3)
    return enumerate_sequences(c, ProductState.zeros(3), GHZ_OBSERVABLES)


def classical_frequencies(result: EnumerationResult, tol: float = 1e-12) -> tuple[ClassicalFrequency, ...]:
    """Split the signed recombination into uniformly sampled positive/negative parts.

    Every sequence is drawn with probability 3**-N; p_pos (p_neg) sums the
    conditional probabilities of the positive (negative) sequences.
    """
    n_seq = len(result.rows)
    out = []
    for k, obs in enumerate(result.observables):
        p_pos = sum(r.conditionals[k] for r in result.rows if r.sign > 0) / n_seq
        p_neg = sum(r.conditionals[k] for r in result.rows if r.sign < 0) / n_seq
        recon = n_seq * (p_pos - p_neg)
        if abs(recon - result.totals[k]) > tol:
            raise AssertionError(
                f"{observable_label(obs)}: reconstruction {recon} != recombined {result.totals[k]}"
            )
        out.append(ClassicalFrequency(observable_label(obs), p_pos, p_neg, n_seq, recon))
    return tuple(out)


def ghz_classical_frequencies() -> tuple[ClassicalFrequency, ...]:
    return classical_frequencies(ghz_enumeration())


def ghz_table() -> GhzReport:
    res = ghz_enumeration()
    if len(res.rows) != 9 or sum(r.sign for r in res.rows) != 1:
        raise AssertionError("GHZ enumeration must produce nine rows with signs summing to +1")
    return GhzReport(res, classical_frequencies(res))


def max_product_fidelity(state: np.ndarray, tol: float = 1e-10) -> float:
    """Largest overlap |<a,b|psi>|^2 with a product state (largest squared Schmidt coefficient)."""
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (4,):
        raise ValueError(f"expected a two-qubit state vector, got shape {psi.shape}")
    if abs(np.vdot(psi, psi).real - 1.0) > tol:
        raise ValueError("state is not normalized")
    s = np.linalg.svd(psi.reshape(2, 2), compute_uv=False)
    return float(s[0] ** 2)


@dataclass(frozen=True)
class NegativityReport:
    bell_fidelity: float
    local_fidelity: float
    achieved_negativity: float
    required_negativity: float
    saturated: bool


def negativity_lower_bound_check(tol: float = 1e-10) -> NegativityReport:
    """Check that the decomposition's negativity equals the lower bound n >= 2F - 1.

    A mixture with positive weight 1+n and negative weight n of product
    states overlaps a Bell state by at most (1+n) * F_local with F_local = 1/2.
    Running the signed decomposition on |+0> must yield the Bell state with F = 1.
    """
    ops = decompose_cnot()
    plus0 = np.kron(np.array([1, 1]) / np.sqrt(2), np.array([1, 0])).astype(complex)
    rho = density(plus0)
    out = sum(apply_channel(op.signed_channel(), rho) for op in ops)
    bell = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    fidelity = float(np.vdot(bell, out @ bell).real)
    local = max_product_fidelity(bell)
    achieved = float(sum(-op.weight for op in ops if op.weight < 0))
    # F <= (1 + n) * local  =>  n >= F / local - 1; with local = 1/2 this is 2F - 1
    required = fidelity / local - 1.0
    return NegativityReport(fidelity, local, achieved, required, abs(achieved - required) <= tol)
