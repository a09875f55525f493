"""Invariant checks run by ``quasisim verify``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analysis
from .exact import (
    CNOT_MATRIX,
    PAULI_PAIR_BASIS,
    apply_channel,
    chi_of_channel,
    chi_support,
    cnot_channel,
    I2,
    X,
    Z,
)
from .quasiprob import decompose_cnot, overhead_ratio, sequence_census

DEFAULT_TOL = 1e-10

# rows of the GHZ table: (XXX=+1, XYY=-1, YXY=-1, YYX=-1) and the sign
GHZ_GOLDEN = {
    "L1-L1": (1, (0.5, 0.5, 0.5, 0.5)),
    "L1-L2": (1, (0.5, 0.5, 0.5, 0.5)),
    "L1-L3bar": (-1, (0.5, 0.5, 0.5, 0.5)),
    "L2-L1": (1, (0.5, 0.5, 0.5, 0.5)),
    "L2-L2": (1, (1.0, 0.5, 0.5, 0.5)),
    "L2-L3bar": (-1, (0.5, 0.5, 0.0, 0.5)),
    "L3bar-L1": (-1, (0.5, 0.5, 0.5, 0.5)),
    "L3bar-L2": (-1, (0.5, 0.5, 0.5, 0.0)),
    "L3bar-L3bar": (1, (0.5, 1.0, 0.5, 0.5)),
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    detail: str = ""


def _max_abs(a) -> float:
    return float(np.max(np.abs(a)))


def check_cnot_expansion() -> CheckResult:
    u = 0.5 * (np.kron(I2, I2) + np.kron(Z, I2) + np.kron(I2, X) - np.kron(Z, X))
    r = _max_abs(u - CNOT_MATRIX)
    return CheckResult("cnot_pauli_expansion", r <= 1e-15, r)


def check_kraus_completeness(tol: float) -> list[CheckResult]:
    out = []
    for op in decompose_cnot():
        if op.weight > 0:
            r = op.channel().completeness_residual()
            out.append(CheckResult(f"cptp_{op.kind}", r <= tol, r))
        else:
            ua, ub = op.kraus()
            r = max(
                _max_abs(ua @ ua.conj().T - np.eye(4)),
                _max_abs(ub @ ub.conj().T - np.eye(4)),
                _max_abs(ub - ua.conj().T),
                _max_abs(ub @ ua - np.eye(4)),
            )
            out.append(CheckResult(f"unitary_{op.kind}", r <= tol, r, "U_b = U_a^dag = U_a^-1"))
    return out


def decomposition_residual() -> float:
    """max entrywise |L1(B) + L2(B) - L3bar(B) - CNOT B CNOT^dag| over the 16 Pauli products."""
    ops = decompose_cnot()
    u = CNOT_MATRIX
    worst = 0.0
    for b in PAULI_PAIR_BASIS:
        lhs = sum(apply_channel(op.signed_channel(), b) for op in ops)
        worst = max(worst, _max_abs(lhs - u @ b @ u.conj().T))
    return worst


def check_channel_equality(tol: float) -> CheckResult:
    r = decomposition_residual()
    return CheckResult("channel_equality", r <= tol, r, "L1 + L2 - L3bar = CNOT on all Pauli products")


def check_chi(tol: float) -> list[CheckResult]:
    chi_c = chi_of_channel(cnot_channel())
    support = chi_support(chi_c)
    ok_support = sorted(support) == sorted(["II", "IX", "ZI", "ZX"])
    rank = int(np.linalg.matrix_rank(chi_c, tol=1e-9))
    diag = np.abs(np.diag(chi_c))[np.abs(np.diag(chi_c)) > 1e-12]
    equal = float(np.ptp(diag)) if diag.size else 1.0
    chi_sum = sum(chi_of_channel(op.signed_channel()) for op in decompose_cnot())
    r = _max_abs(chi_sum - chi_c)
    return [
        CheckResult(
            "chi_support_cnot",
            ok_support and rank == 1 and equal <= tol,
            equal,
            "support=" + ",".join(support),
        ),
        CheckResult("chi_decomposition", r <= tol, r, "chi(L1)+chi(L2)-chi(L3bar) = chi(CNOT)"),
    ]


def check_census(max_n: int = 12) -> list[CheckResult]:
    out = []
    bad = []
    for n in range(max_n + 1):
        pos, neg = sequence_census(n)
        if (pos, neg) != ((3**n + 1) // 2, (3**n - 1) // 2) or overhead_ratio(n) != 3**n:
            bad.append(n)
    out.append(
        CheckResult(
            "sequence_census",
            not bad,
            float(len(bad)),
            f"N=2 -> {sequence_census(2)}; N<= {max_n} checked",
        )
    )
    return out


def check_fidelity_bound(tol: float) -> CheckResult:
    rep = analysis.negativity_lower_bound_check(tol)
    r = max(abs(rep.local_fidelity - 0.5), abs(rep.achieved_negativity - rep.required_negativity))
    return CheckResult(
        "negativity_bound",
        rep.saturated and abs(rep.local_fidelity - 0.5) <= tol,
        r,
        f"F_local={rep.local_fidelity:.12g} achieved={rep.achieved_negativity:g} "
        f"required={rep.required_negativity:.12g}",
    )


def check_ghz_table(tol: float = 1e-9) -> CheckResult:
    rep = analysis.ghz_table()
    worst = 0.0
    ok = len(rep.rows) == len(GHZ_GOLDEN)
    for row in rep.rows:
        sign, cond = GHZ_GOLDEN[row.label]
        ok &= row.sign == sign
        worst = max(worst, _max_abs(np.array(row.conditionals) - cond))
    worst = max(worst, _max_abs(np.array(rep.recombined) - 1.0))
    return CheckResult("ghz_table", ok and worst <= tol, worst, "36 conditionals, 9 signs, 4 totals")


def run_checks(tol: float = DEFAULT_TOL) -> list[CheckResult]:
    checks = [check_cnot_expansion()]
    checks += check_kraus_completeness(tol)
    checks.append(check_channel_equality(tol))
    checks += check_chi(tol)
    checks += check_census()
    checks.append(check_fidelity_bound(tol))
    checks.append(check_ghz_table())
    return checks
