import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsecg import CapacityError, CoordinationGraph, InvalidArgument, NumericFailure, ObsKey, ValueTables
from sparsecg.graph import build_complete_graph
from sparsecg.values import (
    Prop1Inputs,
    delta_ij,
    prop1_lower_bound,
    q_tot,
    sparse_loss,
    sparse_loss_grad,
    zeta_delta_max,
    zeta_delta_var,
    zeta_qvar,
)

K0, K1, K2 = ObsKey(0, 7), ObsKey(1, 3), ObsKey(2, 0)


def test_unseen_entries_read_zero():
    t = ValueTables(3)
    np.testing.assert_array_equal(t.utility(K0), np.zeros(3))
    np.testing.assert_array_equal(t.payoff(K0, K1), np.zeros((3, 3)))
    assert t.n_rows == 0 and t.row(K0) == -1


def test_payoff_is_stored_once_and_transposed():
    t = ValueTables(2)
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    t.set_payoff(K1, K0, M)
    np.testing.assert_array_equal(t.payoff(K1, K0), M)
    np.testing.assert_array_equal(t.payoff(K0, K1), M.T)
    assert t.n_pair_rows == 1
    with pytest.raises(InvalidArgument):
        t.payoff(K0, ObsKey(0, 1))


def test_snapshot_is_read_only_and_independent():
    t = ValueTables(2)
    t.set_utility(K0, [1.0, 2.0])
    s = t.snapshot()
    t.set_utility(K0, [5.0, 5.0])
    np.testing.assert_array_equal(s.utility(K0), [1.0, 2.0])
    with pytest.raises(InvalidArgument):
        s.set_utility(K0, [0.0, 0.0])
    with pytest.raises(ValueError):
        s.u[0, 0] = 1.0
    c = s.copy()
    c.set_utility(K1, [1.0, 1.0])
    assert c.n_rows == 2 and s.n_rows == 1


def test_capacity_limit():
    t = ValueTables(2, entry_cap=5)
    t.set_utility(K0, [0.0, 0.0])
    t.set_utility(K1, [0.0, 0.0])
    with pytest.raises(CapacityError):
        t.set_payoff(K0, K1, np.zeros((2, 2)))


def test_growth_beyond_initial_block():
    t = ValueTables(2)
    for k in range(200):
        t.set_utility(ObsKey(0, k), [k, -k])
    assert t.n_rows == 200
    np.testing.assert_array_equal(t.utility(ObsKey(0, 150)), [150, -150])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(0, 30))
def test_checkpoint_round_trip(tmp_path_factory, seed, A, n_keys):
    rng = np.random.default_rng(seed)
    t = ValueTables(A)
    keys = [ObsKey(int(rng.integers(4)), int(rng.integers(50))) for _ in range(n_keys)]
    for k in keys:
        t.set_utility(k, rng.normal(size=A))
    for a, b in zip(keys, keys[1:]):
        if a.agent_id != b.agent_id:
            t.set_payoff(a, b, rng.normal(size=(A, A)))
    path = tmp_path_factory.mktemp("ck") / "t.npz"
    t.save(path)
    r = ValueTables.load(path)
    assert r.keys() == t.keys() and r.pair_keys() == t.pair_keys()
    assert r.u.tobytes() == t.u.tobytes() and r.p.tobytes() == t.p.tobytes()


def test_checkpoint_rejects_foreign_format(tmp_path):
    path = tmp_path / "bad.npz"
    with open(path, "wb") as fh:
        np.savez(fh, format=np.array("other v9"))
    with pytest.raises(InvalidArgument):
        ValueTables.load(path)


def test_zeta_qvar_hand_value():
    # row variances: var(0, 2) = 1, var(1, 1) = 0
    assert zeta_qvar([[0.0, 2.0], [1.0, 1.0]]) == 1.0
    with pytest.raises(InvalidArgument):
        zeta_qvar([[np.nan, 0.0], [0.0, 0.0]])


def test_delta_scores():
    t = ValueTables(2)
    t.set_utility(K0, [1.0, 0.0])
    t.set_utility(K1, [0.0, 2.0])
    t.set_payoff(K0, K1, [[1.0, 3.0], [0.0, 2.0]])
    np.testing.assert_array_equal(delta_ij(t, K0, K1), [[0.0, 0.0], [0.0, 0.0]])
    assert zeta_delta_max(t, K0, K1) == 0.0
    assert zeta_delta_var(t, K0, K1) == 0.0


def test_q_tot_forms():
    t = ValueTables(2)
    t.set_utility(K0, [1.0, 0.0])
    t.set_utility(K1, [0.0, 1.0])
    t.set_utility(K2, [2.0, 2.0])
    t.set_payoff(K0, K1, [[0.0, 6.0], [0.0, 0.0]])
    t.set_payoff(K1, K2, [[3.0, 0.0], [0.0, 0.0]])
    keys = (K0, K1, K2)
    a = (0, 1, 0)
    g = CoordinationGraph.from_edges(3, [(0, 1)])
    # (1 + 1 + 2) / 3 + 6 / 1
    assert q_tot(t, g, keys, a) == pytest.approx(4 / 3 + 6)
    # ordered pairs: 6 counted twice, (1,2) payoff at (1, 0) is 0
    assert q_tot(t, g, keys, a, all_pairs=True) == pytest.approx(4 / 3 + 12 / 6)
    assert q_tot(t, CoordinationGraph(3), keys, a) == pytest.approx(4 / 3)


def test_sparse_loss_hand_value():
    t = ValueTables(2)
    t.set_payoff(K0, K1, [[0.0, 2.0], [1.0, 1.0]])
    # ordered (0,1): 1 + 0; ordered (1,0): 0.25 + 0.25; divided by n(n-1)|A| = 4
    assert sparse_loss(t, "qvar", [(K0, K1)]) == pytest.approx(0.375)
    assert sparse_loss(t, "abs_delta", [(K0, K1)]) == pytest.approx(2 * 4 / 8)
    with pytest.raises(InvalidArgument):
        sparse_loss(t, "qvar", [])
    with pytest.raises(InvalidArgument):
        sparse_loss(t, "l2", [(K0, K1)])


def _flat(t, variant, keys):
    return sparse_loss(t, variant, keys)


@pytest.mark.parametrize("variant", ["qvar", "delta_var", "abs_delta"])
def test_gradient_matches_finite_differences(variant):
    rng = np.random.default_rng(3)
    t = ValueTables(3)
    keys = [(ObsKey(0, 0), ObsKey(1, 0), ObsKey(2, 0)), (ObsKey(0, 1), ObsKey(1, 0), ObsKey(2, 1))]
    for ks in keys:
        for k in ks:
            t.set_utility(k, rng.normal(size=3))
        for i in range(3):
            for j in range(i + 1, 3):
                t.set_payoff(ks[i], ks[j], rng.normal(size=(3, 3)))
    g = sparse_loss_grad(t, variant, keys)
    h = 1e-6
    for (ki, kj), G in g.payoff.items():
        for a in range(3):
            for b in range(3):
                M = t.payoff(ki, kj)
                M[a, b] += h
                t.set_payoff(ki, kj, M)
                up = _flat(t, variant, keys)
                M[a, b] -= 2 * h
                t.set_payoff(ki, kj, M)
                down = _flat(t, variant, keys)
                M[a, b] += h
                t.set_payoff(ki, kj, M)
                assert G[a, b] == pytest.approx((up - down) / (2 * h), abs=1e-6)
    if variant == "qvar":
        assert not g.utility


def test_prop1_bound_hand_values():
    # spread (1 - 0)(2 - 1) = 1, den = zeta = 1
    assert prop1_lower_bound(Prop1Inputs((0.0, 1.0, 2.0), 1.0, 0.0, 3)) == pytest.approx(0.0)
    # den = 0 + 2 + 2 * sqrt(1) = 4: (2/2) * (1/16 - 1)
    assert prop1_lower_bound(Prop1Inputs((0.0, 2.0), 0.0, 1.0, 2)) == pytest.approx(-0.9375)
    with pytest.raises(NumericFailure):
        prop1_lower_bound(Prop1Inputs((0.0, 1.0), 0.0, 0.0, 2))


@pytest.mark.parametrize("kw", [dict(m=()), dict(zeta=-1.0), dict(A_bound=np.inf), dict(n_actions=0)])
def test_prop1_inputs_validated(kw):
    base = dict(m=(0.0, 1.0), zeta=1.0, A_bound=1.0, n_actions=2)
    base.update(kw)
    with pytest.raises(InvalidArgument):
        Prop1Inputs(**base)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=5), st.floats(0.0, 4.0), st.floats(0.0, 3.0))
def test_prop1_bound_decreases_with_zeta(m, zeta, A):
    n = len(m)
    lo = Prop1Inputs(tuple(m), zeta, A + 0.1, n)
    hi = Prop1Inputs(tuple(m), zeta + 1.0, A + 0.1, n)
    assert prop1_lower_bound(hi) <= prop1_lower_bound(lo) + 1e-12


def test_complete_graph_all_pairs_agree():
    rng = np.random.default_rng(0)
    t = ValueTables(2)
    keys = tuple(ObsKey(i, 0) for i in range(3))
    for k in keys:
        t.set_utility(k, rng.normal(size=2))
    for i in range(3):
        for j in range(i + 1, 3):
            t.set_payoff(keys[i], keys[j], rng.normal(size=(2, 2)))
    g = build_complete_graph(3)
    a = (1, 0, 1)
    assert q_tot(t, g, keys, a) == pytest.approx(q_tot(t, g, keys, a, all_pairs=True))
