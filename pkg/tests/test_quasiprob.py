import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasisim.circuit import Circuit, Cnot, LocalUnitary, PauliString, ghz_circuit
from quasisim.exact import apply_channel, cnot_channel, density, parity_probability, run_exact
from quasisim.quasiprob import (
    KINDS,
    L1,
    L2,
    L3BAR,
    BudgetExceeded,
    EntangledInputError,
    ProductState,
    decompose_cnot,
    enumerate_sequences,
    expand_branches,
    apply_local_op,
    local_operation,
    overhead_ratio,
    sample,
    sequence_census,
    sequence_sign,
    trajectory,
    trajectory_keys,
    uniform_draws,
)

S2 = 1 / np.sqrt(2)
GHZ_OBS = [
    (PauliString("XXX"), 1),
    (PauliString("XYY"), -1),
    (PauliString("YXY"), -1),
    (PauliString("YYX"), -1),
]


def same_ray(a, b, tol=1e-12):
    """Equal up to a global phase."""
    return abs(abs(np.vdot(a, b)) - 1.0) <= tol


def random_qubit(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


def random_product(rng, n):
    return ProductState(np.array([random_qubit(rng) for _ in range(n)]))


def random_unitary(rng):
    q, r = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_circuit(rng, n, n_cnots, locals_per_cnot=2):
    gates = []
    for _ in range(n_cnots + 1):
        for _ in range(locals_per_cnot):
            gates.append(LocalUnitary.custom(int(rng.integers(n)), random_unitary(rng)))
        if len([g for g in gates if isinstance(g, Cnot)]) < n_cnots:
            a, b = rng.choice(n, 2, replace=False)
            gates.append(Cnot(int(a), int(b)))
    return Circuit(n, gates)


def random_observable(rng, n):
    while True:
        letters = "".join(rng.choice(list("IXYZ"), n))
        if set(letters) != {"I"}:
            return PauliString(letters), int(rng.choice([1, -1]))


# -- decomposition --------------------------------------------------------------


def test_weights():
    assert [op.weight for op in decompose_cnot()] == [1, 1, -1]
    assert [op.kind for op in decompose_cnot()] == [L1, L2, L3BAR]
    assert sum(op.weight for op in decompose_cnot()) == 1


def test_signed_channels_sum_to_cnot():
    ops = decompose_cnot()
    total = ops[0].signed_channel() + ops[1].signed_channel() + ops[2].signed_channel()
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        assert np.max(np.abs(apply_channel(total, a) - apply_channel(cnot_channel(), a))) <= 1e-10


def test_l3bar_branches_are_inverse():
    ua, ub = local_operation(L3BAR).kraus()
    assert np.max(np.abs(ua @ ub - np.eye(4))) <= 1e-12
    # matches 1/2 (I + iZ) x (I - iX)
    expect = 0.5 * np.kron(np.eye(2) + 1j * np.diag([1, -1]), np.eye(2) - 1j * np.array([[0, 1], [1, 0]]))
    assert np.max(np.abs(ua - expect)) <= 1e-15


# -- single operations -----------------------------------------------------------


def test_l1_on_plus_zero_branches():
    st_ = ProductState.from_label("+0")
    branches = expand_branches(st_, local_operation(L1), 0, 1)
    assert len(branches) == 2
    (s0, w0), (s1, w1) = branches
    assert w0 == pytest.approx(0.5, abs=1e-15) and w1 == pytest.approx(0.5, abs=1e-15)
    assert same_ray(s0.to_statevector(), ProductState.from_label("00").to_statevector())
    assert same_ray(s1.to_statevector(), ProductState.from_label("11").to_statevector())
    # mixture of branches equals the channel output on |+0><+0|
    mix = sum(w * density(s.to_statevector()) for s, w in branches)
    ch = apply_channel(local_operation(L1).channel(), density(st_.to_statevector()))
    assert np.max(np.abs(mix - ch)) <= 1e-15


def test_l1_stochastic_frequencies():
    rng = np.random.default_rng(11)
    st_ = ProductState.from_label("+0")
    counts = [0, 0]
    for _ in range(4000):
        new, k = apply_local_op(st_, local_operation(L1), 0, 1, rng)
        counts[k] += 1
        label = "00" if k == 0 else "11"
        assert same_ray(new.to_statevector(), ProductState.from_label(label).to_statevector())
    # binomial(4000, 1/2): sd ~ 32
    assert abs(counts[0] - 2000) < 160


def test_l1_deterministic_control():
    rng = np.random.default_rng(2)
    psi = random_qubit(rng)
    st_ = ProductState(np.array([[1, 0], psi]))
    for _ in range(20):
        new, k = apply_local_op(st_, local_operation(L1), 0, 1, rng)
        assert k == 0
        assert np.allclose(new.qubits, st_.qubits)
    assert len(expand_branches(st_, local_operation(L1), 0, 1)) == 1


def test_l3bar_on_zero_zero():
    st_ = ProductState.from_label("00")
    (a, wa), (b, wb) = expand_branches(st_, local_operation(L3BAR), 0, 1)
    assert wa == wb == 0.5
    # (I + iZ)/sqrt2 |0> = (1 + i)/sqrt2 |0>; (I - iX)/sqrt2 |0> = (|0> - i|1>)/sqrt2
    assert np.allclose(a.qubits[0], [(1 + 1j) * S2, 0], atol=1e-15)
    assert np.allclose(a.qubits[1], [S2, -1j * S2], atol=1e-15)
    assert np.allclose(b.qubits[1], [S2, 1j * S2], atol=1e-15)
    assert np.allclose(np.linalg.norm(a.qubits, axis=1), 1.0, atol=1e-15)


def test_l2_on_plus_target_prunes():
    rng = np.random.default_rng(5)
    st_ = ProductState(np.array([random_qubit(rng), [S2, S2]]))
    branches = expand_branches(st_, local_operation(L2), 0, 1)
    assert len(branches) == 1
    s, w = branches[0]
    assert w == 1.0
    assert same_ray(s.to_statevector(), st_.to_statevector())


def test_branch_weights_normalized_random_states():
    rng = np.random.default_rng(9)
    for _ in range(1000):
        st_ = random_product(rng, 3)
        c, t = rng.choice(3, 2, replace=False)
        for kind in KINDS:
            ws = [w for _, w in expand_branches(st_, local_operation(kind), int(c), int(t))]
            assert abs(sum(ws) - 1.0) <= 1e-12


def test_expand_branches_matches_channel_on_random_states():
    rng = np.random.default_rng(21)
    for _ in range(50):
        st_ = random_product(rng, 2)
        rho = density(st_.to_statevector())
        for op in decompose_cnot():
            mix = sum(w * density(s.to_statevector()) for s, w in expand_branches(st_, op, 0, 1))
            assert np.max(np.abs(mix - apply_channel(op.channel(), rho))) <= 1e-12


def test_bad_pair():
    st_ = ProductState.zeros(2)
    with pytest.raises(ValueError):
        expand_branches(st_, local_operation(L1), 1, 1)


# -- sequences ---------------------------------------------------------------------


def test_sequence_sign():
    assert sequence_sign([L3BAR, L2, L3BAR]) == 1
    assert sequence_sign([L2, L3BAR]) == -1
    assert sequence_sign([]) == 1


def brute_census(n):
    pos = neg = 0
    for seq in itertools.product(KINDS, repeat=n):
        if seq.count(L3BAR) % 2:
            neg += 1
        else:
            pos += 1
    return pos, neg


@pytest.mark.parametrize("n", range(0, 9))
def test_census_against_brute_force(n):
    assert sequence_census(n) == brute_census(n)


def test_census_examples():
    assert sequence_census(2) == (5, 4)
    assert sequence_census(0) == (1, 0)
    assert sequence_census(3) == (14, 13)
    with pytest.raises(OverflowError):
        sequence_census(39)
    with pytest.raises(ValueError):
        sequence_census(-1)


def test_overhead_ratio():
    assert overhead_ratio(2) == 9
    assert overhead_ratio(0) == 1
    assert overhead_ratio(10) == 59049


def test_signed_sum_is_one():
    for n in range(7):
        assert sum(sequence_sign(s) for s in itertools.product(KINDS, repeat=n)) == 1


# -- enumeration -------------------------------------------------------------------


def test_ghz_enumeration_xxx():
    res = enumerate_sequences(ghz_circuit(), ProductState.zeros(3), GHZ_OBS)
    cond = {r.label: r.conditionals[0] for r in res.rows}
    assert cond.pop("L2-L2") == pytest.approx(1.0, abs=1e-12)
    assert all(v == pytest.approx(0.5, abs=1e-12) for v in cond.values())
    assert res.totals[0] == pytest.approx(1.0, abs=1e-12)


def test_ghz_enumeration_yxy():
    res = enumerate_sequences(ghz_circuit(), ProductState.zeros(3), GHZ_OBS)
    cond = {r.label: r.conditionals[2] for r in res.rows}
    assert cond.pop("L2-L3bar") == pytest.approx(0.0, abs=1e-12)
    assert all(v == pytest.approx(0.5, abs=1e-12) for v in cond.values())
    assert res.totals[2] == pytest.approx(1.0, abs=1e-12)


def test_zero_cnot_circuit_matches_oracle():
    rng = np.random.default_rng(4)
    c = Circuit(3, [LocalUnitary.custom(q, random_unitary(rng)) for q in (0, 1, 2, 1)])
    st_ = random_product(rng, 3)
    obs = (PauliString("XYZ"), 1)
    res = enumerate_sequences(c, st_, [obs])
    assert len(res.rows) == 1 and res.rows[0].label == "none"
    exact = parity_probability(run_exact(c, st_.to_statevector()), *obs)
    assert res.totals[0] == pytest.approx(exact, abs=1e-12)


def test_budget_guard():
    c = Circuit(2, [Cnot(0, 1)] * 13)
    with pytest.raises(BudgetExceeded) as exc:
        enumerate_sequences(c, ProductState.zeros(2), [(PauliString("ZZ"), 1)])
    assert exc.value.required == 3**13 * 2**13
    with pytest.raises(BudgetExceeded):
        enumerate_sequences(ghz_circuit(), ProductState.zeros(3), GHZ_OBS, budget=35)


def test_entangled_input_rejected():
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    with pytest.raises(EntangledInputError):
        enumerate_sequences(Circuit(2, [Cnot(0, 1)]), bell, [(PauliString("ZZ"), 1)])


def test_statevector_product_input_accepted():
    rng = np.random.default_rng(8)
    st_ = random_product(rng, 3)
    back = ProductState.from_statevector(st_.to_statevector())
    assert same_ray(back.to_statevector(), st_.to_statevector())


def test_enumeration_workers_identical():
    rng = np.random.default_rng(12)
    c = random_circuit(rng, 4, 4)
    obs = [random_observable(rng, 4) for _ in range(3)]
    a = enumerate_sequences(c, ProductState.zeros(4), obs, workers=1)
    b = enumerate_sequences(c, ProductState.zeros(4), obs, workers=3)
    assert a == b


@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(0, 3))
@settings(max_examples=25, deadline=None)
def test_enumeration_matches_oracle(seed, n, n_cnots):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, n, n_cnots)
    st_ = random_product(rng, n)
    obs = [random_observable(rng, n) for _ in range(10)]
    res = enumerate_sequences(c, st_, obs)
    psi = run_exact(c, st_.to_statevector())
    for (p, parity), got in zip(obs, res.totals):
        assert got == pytest.approx(parity_probability(psi, p, parity), abs=1e-8)
    assert sum(r.sign for r in res.rows) == 1


# -- trajectories and sampling ---------------------------------------------------------


def test_uniform_draws_look_uniform():
    u = uniform_draws(trajectory_keys(123, np.arange(200_000, dtype=np.uint64)), 0)
    assert 0.0 <= u.min() and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.003
    hist, _ = np.histogram(u, bins=10, range=(0, 1))
    assert np.all(np.abs(hist - 20_000) < 700)


def test_trajectory_product_closure_long_circuit():
    rng = np.random.default_rng(13)
    c = random_circuit(rng, 5, 60, locals_per_cnot=1)
    for t in range(20):
        rec = trajectory(c, random_product(rng, 5), [], seed=7, t=t)
        assert np.max(np.abs(np.linalg.norm(rec.final_state.qubits, axis=1) - 1.0)) <= 1e-10
        assert rec.sign == sequence_sign(rec.choice)
        assert len(rec.choice) == 60 and len(rec.branch_outcomes) == 60


def test_sample_consistent_with_trajectories():
    obs = GHZ_OBS[:2]
    ests = sample(ghz_circuit(), ProductState.zeros(3), obs, shots=300, seed=5, block=64)
    pos = [0, 0]
    neg = [0, 0]
    for t in range(300):
        rec = trajectory(ghz_circuit(), ProductState.zeros(3), obs, seed=5, t=t)
        for o, (_, parity) in enumerate(obs):
            if rec.observable_outcomes[o] == parity:
                if rec.sign > 0:
                    pos[o] += 1
                else:
                    neg[o] += 1
    for o, e in enumerate(ests):
        assert (e.pos_count, e.neg_count) == (pos[o], neg[o])


def test_sample_deterministic_across_workers_and_blocks():
    c = ghz_circuit()
    a = sample(c, ProductState.zeros(3), GHZ_OBS, shots=50_000, seed=99, workers=1)
    b = sample(c, ProductState.zeros(3), GHZ_OBS, shots=50_000, seed=99, workers=4)
    d = sample(c, ProductState.zeros(3), GHZ_OBS, shots=50_000, seed=99, workers=3, block=1000)
    assert a == b == d
    e = sample(c, ProductState.zeros(3), GHZ_OBS, shots=50_000, seed=100)
    assert e != a


def test_sample_zero_cnot():
    c = Circuit(2, [LocalUnitary.named("h", 0)])
    (e,) = sample(c, ProductState.zeros(2), [(PauliString("XZ"), 1)], shots=1000, seed=1)
    assert e.p_neg == 0.0 and e.amplification == 1.0
    assert e.estimate == 1.0


def test_sample_rejects_zero_shots():
    with pytest.raises(ValueError):
        sample(ghz_circuit(), ProductState.zeros(3), GHZ_OBS, shots=0)


def test_estimate_formula_exact():
    for e in sample(ghz_circuit(), ProductState.zeros(3), GHZ_OBS, shots=2000, seed=3):
        assert e.amplification == 9.0
        assert e.estimate == 9.0 * ((e.pos_count - e.neg_count) / e.shots)
        assert 0 <= e.p_pos <= 1 and 0 <= e.p_neg <= 1


def test_estimator_unbiased_over_seeds():
    exact = enumerate_sequences(ghz_circuit(), ProductState.zeros(3), GHZ_OBS).totals
    runs = [sample(ghz_circuit(), ProductState.zeros(3), GHZ_OBS, shots=100_000, seed=s) for s in range(50)]
    for o in range(len(GHZ_OBS)):
        vals = np.array([r[o].estimate for r in runs])
        errs = np.array([r[o].std_error for r in runs])
        combined = np.sqrt(np.sum(errs**2)) / len(runs)
        assert abs(vals.mean() - exact[o]) < 3 * combined


def test_sample_random_circuit_converges():
    rng = np.random.default_rng(17)
    c = random_circuit(rng, 3, 2)
    st_ = random_product(rng, 3)
    obs = [random_observable(rng, 3) for _ in range(3)]
    exact = enumerate_sequences(c, st_, obs).totals
    for e, x in zip(sample(c, st_, obs, shots=400_000, seed=2), exact):
        assert abs(e.estimate - x) < 5 * e.std_error + 1e-12
