"""Signed local-operation simulation of CNOT circuits.

Every CNOT is replaced by one of three local operations::

    CNOT(rho) = L1(rho) + L2(rho) - L3bar(rho)

L1 measures Z on the control and flips the target on outcome -1, L2 measures
X on the target and applies Z to the control on outcome -1, and L3bar is an
equal mixture of the correlated pi/2 rotations U_a = Rz(control) x Rx(target)
and its inverse. None of them entangles, so a trajectory only ever holds one
2-vector per qubit.

Two estimators recover the quantum statistics:

* :func:`enumerate_sequences` walks all 3**N operation sequences, expands the
  internal measurement branches exactly and recombines p(m) = sum_i p(m|i) p(i).
* :func:`sample` draws each CNOT's operation uniformly, samples branches and
  outcomes by the Born rule, and reports 3**N (p_pos - p_neg).
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .circuit import Circuit, Cnot, LocalUnitary, PauliString
from .exact import I2, X, Z

L1, L2, L3BAR = "L1", "L2", "L3bar"
KINDS = (L1, L2, L3BAR)

BORN, HALF = "born", "half"
PRUNE_TOL = 1e-15
DEFAULT_BUDGET = 10**8
MAX_CENSUS_N = 38
SAMPLE_BLOCK = 1 << 15

_RZ = (I2 + 1j * Z) / np.sqrt(2.0)
_RX = (I2 - 1j * X) / np.sqrt(2.0)


class BudgetExceeded(RuntimeError):
    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(
            f"enumeration needs up to 3^N*2^N = {required} weighted branches, "
            f"budget is {budget}"
        )


class EntangledInputError(ValueError):
    pass


@dataclass(frozen=True)
class LocalOperation:
    """One term of the CNOT decomposition.

    ``branches`` holds ``(control_matrix, target_matrix)`` Kraus factors; the
    branch probability is the Born weight of the factor pair, or exactly 1/2
    for the L3bar mixture.
    """

    kind: str
    weight: int
    branches: tuple[tuple[np.ndarray, np.ndarray], ...]
    rule: str

    def kraus(self) -> list[np.ndarray]:
        return [np.kron(a, b) for a, b in self.branches]

    def channel(self):
        """Positive channel of this operation (the sign is not applied)."""
        from .exact import Channel

        w = 1.0 if self.rule == BORN else 0.5
        return Channel((0, 1), tuple((k, w) for k in self.kraus()))

    def signed_channel(self):
        return self.channel().scaled(float(self.weight))


def decompose_cnot() -> list[LocalOperation]:
    l1 = LocalOperation(L1, +1, (((I2 + Z) / 2, I2), ((I2 - Z) / 2, X)), BORN)
    l2 = LocalOperation(L2, +1, ((I2, (I2 + X) / 2), (Z, (I2 - X) / 2)), BORN)
    l3 = LocalOperation(
        L3BAR, -1, ((_RZ, _RX), (_RZ.conj().T, _RX.conj().T)), HALF
    )
    return [l1, l2, l3]


_OPS = {op.kind: op for op in decompose_cnot()}


def local_operation(kind: str) -> LocalOperation:
    return _OPS[kind]


# -- product states ---------------------------------------------------------

_NAMED_QUBIT_STATES = {
    "0": (1, 0),
    "1": (0, 1),
    "+": (1 / np.sqrt(2), 1 / np.sqrt(2)),
    "-": (1 / np.sqrt(2), -1 / np.sqrt(2)),
    "r": (1 / np.sqrt(2), 1j / np.sqrt(2)),
    "l": (1 / np.sqrt(2), -1j / np.sqrt(2)),
}


@dataclass(frozen=True, eq=False)
class ProductState:
    qubits: np.ndarray  # shape (n, 2), complex

    def __post_init__(self):
        q = np.array(self.qubits, dtype=complex)
        if q.ndim != 2 or q.shape[1] != 2 or q.shape[0] < 1:
            raise ValueError(f"product state needs shape (n, 2), got {q.shape}")
        norms = np.sum(np.abs(q) ** 2, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("every qubit state must have unit norm")
        q.flags.writeable = False
        object.__setattr__(self, "qubits", q)

    @property
    def n_qubits(self) -> int:
        return self.qubits.shape[0]

    def __eq__(self, other):
        return isinstance(other, ProductState) and np.array_equal(self.qubits, other.qubits)

    def __hash__(self):
        return hash(self.qubits.tobytes())

    def to_statevector(self) -> np.ndarray:
        psi = np.array([1.0 + 0j])
        for v in self.qubits:
            psi = np.kron(psi, v)
        return psi

    @classmethod
    def zeros(cls, n: int) -> "ProductState":
        return cls.from_label("0" * n)

    @classmethod
    def from_label(cls, label: str) -> "ProductState":
        """Per-qubit labels from ``0 1 + - r l`` (r/l are the Y eigenstates)."""
        try:
            return cls(np.array([_NAMED_QUBIT_STATES[ch] for ch in label.lower()]))
        except KeyError as exc:
            raise ValueError(f"unknown qubit state label {exc.args[0]!r}") from None

    @classmethod
    def from_statevector(cls, psi: np.ndarray, tol: float = 1e-10) -> "ProductState":
        """Factor a pure state into qubit states; raises if it is entangled."""
        psi = np.asarray(psi, dtype=complex)
        n = int(psi.shape[0]).bit_length() - 1
        rest = psi.reshape(1, -1)
        factors = []
        for _ in range(n - 1):
            m = rest.reshape(2, -1)
            u, s, vh = np.linalg.svd(m, full_matrices=False)
            if s[1] > tol:
                raise EntangledInputError("input state is entangled; only product inputs are simulable")
            factors.append(u[:, 0] * s[0])
            rest = vh[0]
        factors.append(rest.reshape(2))
        factors = [f / np.linalg.norm(f) for f in factors]
        return cls(np.array(factors))


# -- branch kernel ------------------------------------------------------------


def _branch_batch(kind: str, c: np.ndarray, t: np.ndarray):
    """Both branches of ``kind`` for a batch of (control, target) qubit states.

    ``c`` and ``t`` have shape (B, 2). Returns ``[(c_b, t_b, w_b), ...]`` with
    normalized post-states and branch probabilities. Degenerate Born branches
    (weight <= PRUNE_TOL) are clamped to 0 and the partner to 1.
    """
    op = _OPS[kind]
    out = []
    for a, b in op.branches:
        cb = c @ a.T
        tb = t @ b.T
        nc = np.sum(np.abs(cb) ** 2, axis=1)
        nt = np.sum(np.abs(tb) ** 2, axis=1)
        if op.rule == BORN:
            w = nc * nt
        else:
            w = np.full(c.shape[0], 0.5)
        with np.errstate(divide="ignore", invalid="ignore"):
            cb = cb / np.sqrt(nc)[:, None]
            tb = tb / np.sqrt(nt)[:, None]
        out.append([cb, tb, w])
    if op.rule == BORN:
        w0, w1 = out[0][2], out[1][2]
        tot = w0 + w1
        w0 = np.where(w0 / tot <= PRUNE_TOL, 0.0, w0)
        w1 = np.where(w1 / tot <= PRUNE_TOL, 0.0, w1)
        tot = w0 + w1
        out[0][2] = w0 / tot
        out[1][2] = w1 / tot
        for k in (0, 1):
            dead = out[k][2] == 0.0
            if np.any(dead):
                # placeholder states, never used with nonzero weight
                out[k][0][dead] = (1.0, 0.0)
                out[k][1][dead] = (1.0, 0.0)
    return out


def _check_pair(n: int, control: int, target: int) -> None:
    if control == target:
        raise ValueError("control equals target")
    if not (0 <= control < n and 0 <= target < n):
        raise ValueError(f"qubit index out of range for {n} qubits")


def expand_branches(state: ProductState, op: LocalOperation, control: int, target: int):
    """Exact list of ``(ProductState, weight)`` for both branches, zero weights pruned."""
    _check_pair(state.n_qubits, control, target)
    q = state.qubits
    res = []
    for cb, tb, w in _branch_batch(op.kind, q[None, control], q[None, target]):
        if w[0] <= PRUNE_TOL:
            continue
        new = np.array(q)
        new[control] = cb[0]
        new[target] = tb[0]
        res.append((ProductState(new), float(w[0])))
    return res


def apply_local_op(state: ProductState, op: LocalOperation, control: int, target: int, rng):
    """Run one operation stochastically; returns ``(new_state, branch_index)``."""
    _check_pair(state.n_qubits, control, target)
    q = state.qubits
    branches = _branch_batch(op.kind, q[None, control], q[None, target])
    u = rng.random()
    k = 0 if u < branches[0][2][0] else 1
    if branches[k][2][0] <= 0.0:
        raise AssertionError("selected a zero-probability branch")
    new = np.array(q)
    new[control] = branches[k][0][0]
    new[target] = branches[k][1][0]
    return ProductState(new), k


# -- sequences ----------------------------------------------------------------


def sequence_sign(choice: Sequence[str]) -> int:
    return -1 if sum(1 for k in choice if k == L3BAR) % 2 else 1


def sequence_label(choice: Sequence[str]) -> str:
    return "-".join(choice) if choice else "none"


def sequence_census(n: int) -> tuple[int, int]:
    """(positive, negative) sequence counts among all 3**n, by parity counting."""
    if n < 0:
        raise ValueError("N must be non-negative")
    if n > MAX_CENSUS_N:
        raise OverflowError(f"census is limited to N <= {MAX_CENSUS_N}")
    # counts[p] = number of length-k sequences with L3bar parity p
    even, odd = 1, 0
    for _ in range(n):
        even, odd = 2 * even + odd, 2 * odd + even
    total = 3**n
    if (even, odd) != ((total + 1) // 2, (total - 1) // 2):
        raise AssertionError("parity census disagrees with closed form")
    return even, odd


def overhead_ratio(n: int) -> float:
    """sum_i |p(i)| / sum_i p(i) over all 3**n sequences."""
    pos, neg = sequence_census(n)
    return float((pos + neg) // (pos - neg))


# -- observables ---------------------------------------------------------------


def _qubit_expectations(q: np.ndarray, letter: str) -> np.ndarray:
    """<P> for a batch of single-qubit states (..., 2)."""
    a0, a1 = q[..., 0], q[..., 1]
    if letter == "I":
        return np.ones(q.shape[:-1])
    if letter == "Z":
        return np.abs(a0) ** 2 - np.abs(a1) ** 2
    cross = np.conj(a0) * a1
    if letter == "X":
        return 2.0 * cross.real
    return 2.0 * cross.imag


def product_expectation(states: np.ndarray, p: PauliString) -> np.ndarray:
    """<P> over a batch of product states (B, n, 2); the per-qubit outcomes are
    independent so the parity expectation is the product of qubit expectations."""
    e = np.ones(states.shape[0])
    for k, letter in enumerate(p.letters):
        if letter != "I":
            e = e * _qubit_expectations(states[:, k], letter)
    return e


Observable = tuple[PauliString, int]


def observable_label(obs: Observable) -> str:
    p, parity = obs
    return f"{p.letters}={'+1' if parity > 0 else '-1'}"


def _check_observables(observables: Iterable[Observable], n: int) -> list[Observable]:
    obs = list(observables)
    for p, parity in obs:
        if len(p) != n:
            raise ValueError(f"observable {p} does not match {n} qubits")
        if p.is_identity:
            raise ValueError("parity observable needs at least one non-identity letter")
        if parity not in (1, -1):
            raise ValueError(f"parity must be +1 or -1, got {parity}")
    return obs


def _as_product_state(state, n: int) -> ProductState:
    if isinstance(state, ProductState):
        ps = state
    else:
        ps = ProductState.from_statevector(np.asarray(state))
    if ps.n_qubits != n:
        raise ValueError(f"input has {ps.n_qubits} qubits, circuit has {n}")
    return ps


def _segments(c: Circuit):
    """Split gates into (locals before first CNOT, [(cnot, locals after), ...])."""
    head: list[LocalUnitary] = []
    segs: list[tuple[Cnot, list[LocalUnitary]]] = []
    for g in c.gates:
        if isinstance(g, Cnot):
            segs.append((g, []))
        elif segs:
            segs[-1][1].append(g)
        else:
            head.append(g)
    return head, segs


def _apply_locals(states: np.ndarray, gates: Sequence[LocalUnitary]) -> np.ndarray:
    for g in gates:
        states[:, g.qubit] = states[:, g.qubit] @ g.matrix.T
    return states


# -- enumeration ---------------------------------------------------------------


@dataclass(frozen=True)
class SequenceRow:
    choice: tuple[str, ...]
    sign: int
    conditionals: tuple[float, ...]

    @property
    def label(self) -> str:
        return sequence_label(self.choice)


@dataclass(frozen=True)
class EnumerationResult:
    n_qubits: int
    n_cnots: int
    observables: tuple[Observable, ...]
    rows: tuple[SequenceRow, ...]
    totals: tuple[float, ...]

    @property
    def amplification(self) -> float:
        return float(3**self.n_cnots)

    def total(self, obs_index: int = 0) -> float:
        return self.totals[obs_index]


def enumeration_cost(n_cnots: int) -> int:
    return 3**n_cnots * 2**n_cnots


def enumerate_sequences(
    c: Circuit,
    state,
    observables: Iterable[Observable],
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
) -> EnumerationResult:
    """Exact signed recombination over all 3**N sequences.

    Within a sequence the measurement branches of L1/L2 and the two unitaries
    of L3bar are expanded with their exact weights, so p(m|i) is the
    branch-weighted parity probability.
    """
    n = c.n_qubits
    ps = _as_product_state(state, n)
    obs = _check_observables(observables, n)
    head, segs = _segments(c)
    n_cnots = len(segs)
    cost = enumeration_cost(n_cnots)
    if cost > budget:
        raise BudgetExceeded(cost, budget)

    root = _apply_locals(np.array(ps.qubits)[None].copy(), head)
    root_w = np.ones(1)

    def leaf(states, weights):
        vals = []
        for p, parity in obs:
            e = product_expectation(states, p)
            vals.append(float(np.sum(weights * 0.5 * (1.0 + parity * e))))
        return tuple(vals)

    def walk(states, weights, depth, prefix, out):
        if depth == n_cnots:
            out.append(SequenceRow(prefix, sequence_sign(prefix), leaf(states, weights)))
            return
        g, locals_after = segs[depth]
        c_st, t_st = states[:, g.control], states[:, g.target]
        for kind in KINDS:
            parts_s, parts_w = [], []
            for cb, tb, wb in _branch_batch(kind, c_st, t_st):
                keep = wb > PRUNE_TOL
                if not np.any(keep):
                    continue
                s = states[keep].copy()
                s[:, g.control] = cb[keep]
                s[:, g.target] = tb[keep]
                parts_s.append(s)
                parts_w.append(weights[keep] * wb[keep])
            nxt = _apply_locals(np.concatenate(parts_s), locals_after)
            walk(nxt, np.concatenate(parts_w), depth + 1, prefix + (kind,), out)

    # the first CNOT's three choices form independent sub-trees
    if workers > 1 and n_cnots >= 1:
        g, locals_after = segs[0]
        tasks = []
        for kind in KINDS:
            parts = [
                (cb, tb, wb) for cb, tb, wb in _branch_batch(kind, root[:, g.control], root[:, g.target])
            ]
            tasks.append((kind, parts))

        def run(task):
            kind, parts = task
            ss, ws = [], []
            for cb, tb, wb in parts:
                keep = wb > PRUNE_TOL
                if not np.any(keep):
                    continue
                s = root[keep].copy()
                s[:, g.control] = cb[keep]
                s[:, g.target] = tb[keep]
                ss.append(s)
                ws.append(root_w[keep] * wb[keep])
            out: list[SequenceRow] = []
            walk(_apply_locals(np.concatenate(ss), locals_after), np.concatenate(ws), 1, (kind,), out)
            return out

        with ThreadPoolExecutor(max_workers=min(workers, 3)) as pool:
            rows = [r for chunk in pool.map(run, tasks) for r in chunk]
    else:
        rows = []
        walk(root, root_w, 0, (), rows)

    totals = tuple(
        float(sum(r.sign * r.conditionals[k] for r in rows)) for k in range(len(obs))
    )
    return EnumerationResult(n, n_cnots, tuple(obs), tuple(rows), totals)


# -- counter-based random stream -------------------------------------------------

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_STREAM = np.uint64(0xD1B54A32D192ED03)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def trajectory_keys(seed: int, t: np.ndarray) -> np.ndarray:
    """Per-trajectory stream keys derived from (seed, trajectory index)."""
    base = _splitmix64(np.array([seed % 2**64], dtype=np.uint64))[0]
    with np.errstate(over="ignore"):
        return _splitmix64(base ^ _splitmix64(np.asarray(t, dtype=np.uint64)))


def uniform_draws(keys: np.ndarray, k: int) -> np.ndarray:
    """The k-th uniform in [0, 1) of each trajectory stream."""
    with np.errstate(over="ignore"):
        z = _splitmix64(keys + np.uint64(k + 1) * _STREAM)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


# -- sampling -------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryRecord:
    choice: tuple[str, ...]
    branch_outcomes: tuple[int, ...]
    sign: int
    final_state: ProductState
    observable_outcomes: tuple[int, ...] = ()


@dataclass(frozen=True)
class QuasiEstimate:
    observable: str
    n_cnots: int
    shots: int
    seed: int
    pos_count: int
    neg_count: int
    p_pos: float
    p_neg: float
    amplification: float
    estimate: float
    std_error: float


def _simulate_batch(
    head, segs, root: np.ndarray, obs: Sequence[Observable], keys: np.ndarray
):
    """Run trajectories for the given stream keys.

    Draw layout per trajectory: index 2j picks CNOT j's operation, 2j+1 its
    branch, and 2N + o*n + q the outcome of qubit q for observable o.
    """
    b = keys.shape[0]
    n = root.shape[0]
    n_cnots = len(segs)
    states = np.broadcast_to(root, (b,) + root.shape).copy()
    _apply_locals(states, head)
    choices = np.zeros((b, n_cnots), dtype=np.int8)
    branches = np.zeros((b, n_cnots), dtype=np.int8)
    for j, (g, locals_after) in enumerate(segs):
        kind_idx = np.minimum((uniform_draws(keys, 2 * j) * 3).astype(np.int8), 2)
        u = uniform_draws(keys, 2 * j + 1)
        choices[:, j] = kind_idx
        for ki, kind in enumerate(KINDS):
            m = kind_idx == ki
            if not np.any(m):
                continue
            (c0, t0, w0), (c1, t1, _) = _branch_batch(
                kind, states[m, g.control], states[m, g.target]
            )
            pick0 = u[m] < w0
            states[m, g.control] = np.where(pick0[:, None], c0, c1)
            states[m, g.target] = np.where(pick0[:, None], t0, t1)
            branches[m, j] = np.where(pick0, 0, 1)
        _apply_locals(states, locals_after)
    signs = np.where(np.sum(choices == 2, axis=1) % 2 == 1, -1, 1).astype(np.int8)
    outcomes = np.ones((b, len(obs)), dtype=np.int8)
    for o, (p, _) in enumerate(obs):
        for q, letter in enumerate(p.letters):
            if letter == "I":
                continue
            p_plus = 0.5 * (1.0 + _qubit_expectations(states[:, q], letter))
            u = uniform_draws(keys, 2 * n_cnots + o * n + q)
            outcomes[:, o] *= np.where(u < p_plus, 1, -1).astype(np.int8)
    return choices, branches, signs, states, outcomes


def trajectory(c: Circuit, state, observables: Iterable[Observable], seed: int, t: int) -> TrajectoryRecord:
    """Trajectory ``t`` of :func:`sample` with the given seed, in full detail."""
    ps = _as_product_state(state, c.n_qubits)
    obs = _check_observables(observables, c.n_qubits)
    head, segs = _segments(c)
    keys = trajectory_keys(seed, np.array([t]))
    ch, br, sg, st, oc = _simulate_batch(head, segs, np.array(ps.qubits), obs, keys)
    return TrajectoryRecord(
        tuple(KINDS[k] for k in ch[0]),
        tuple(int(x) for x in br[0]),
        int(sg[0]),
        ProductState(st[0] / np.linalg.norm(st[0], axis=1)[:, None]),
        tuple(int(x) for x in oc[0]),
    )


def _tree_reduce(parts: list[np.ndarray]) -> np.ndarray:
    """Pairwise reduction in a fixed shape determined only by len(parts)."""
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def sample(
    c: Circuit,
    state,
    observables: Iterable[Observable],
    shots: int,
    seed: int = 0,
    workers: int = 1,
    block: int = SAMPLE_BLOCK,
) -> list[QuasiEstimate]:
    """Signed Monte Carlo estimate 3**N (p_pos - p_neg) for each observable.

    Trajectory t draws from a stream keyed on (seed, t) only, and the shot
    range is cut into fixed blocks, so results do not depend on ``workers``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    ps = _as_product_state(state, c.n_qubits)
    obs = _check_observables(observables, c.n_qubits)
    head, segs = _segments(c)
    root = np.array(ps.qubits)
    n_cnots = len(segs)

    def run_block(start: int) -> np.ndarray:
        t = np.arange(start, min(start + block, shots), dtype=np.uint64)
        _, _, signs, _, outcomes = _simulate_batch(head, segs, root, obs, trajectory_keys(seed, t))
        counts = np.zeros((len(obs), 2), dtype=np.int64)
        for o, (_, parity) in enumerate(obs):
            hit = outcomes[:, o] == parity
            counts[o, 0] = np.count_nonzero(hit & (signs > 0))
            counts[o, 1] = np.count_nonzero(hit & (signs < 0))
        return counts

    starts = list(range(0, shots, block))
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_block, starts))
    else:
        parts = [run_block(s) for s in starts]
    counts = _tree_reduce(parts)

    amp = float(3**n_cnots)
    res = []
    for o, ob in enumerate(obs):
        pos, neg = int(counts[o, 0]), int(counts[o, 1])
        mean = (pos - neg) / shots
        if shots > 1:
            var = max(0.0, ((pos + neg) / shots - mean * mean) * shots / (shots - 1))
        else:
            var = 0.0
        res.append(
            QuasiEstimate(
                observable=observable_label(ob),
                n_cnots=n_cnots,
                shots=shots,
                seed=seed,
                pos_count=pos,
                neg_count=neg,
                p_pos=pos / shots,
                p_neg=neg / shots,
                amplification=amp,
                estimate=amp * mean,
                std_error=float(amp * np.sqrt(var / shots)),
            )
        )
    return res


def default_workers() -> int:
    return os.cpu_count() or 1
