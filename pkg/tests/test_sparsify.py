import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsecg import InvalidArgument, ObsKey, TopologyCriterion, ValueTables, edge_budget, select_topology
from sparsecg.sparsify import pair_scores, random_mask


@pytest.mark.parametrize(
    "n,lam,expected",
    [(6, 0.3, 4), (6, 0.5, 8), (6, 0.1, 2), (4, 0.5, 3), (4, 0.25, 2), (4, 0.75, 4), (5, 0.0, 0), (5, 1.0, 10),
     (1, 0.5, 0), (2, 0.5, 0)],
)
def test_edge_budget_half_even(n, lam, expected):
    assert edge_budget(n, lam) == expected


def test_edge_budget_validation():
    with pytest.raises(InvalidArgument):
        edge_budget(0, 0.5)
    with pytest.raises(InvalidArgument):
        edge_budget(3, 1.5)
    with pytest.raises(InvalidArgument):
        TopologyCriterion("bogus")
    with pytest.raises(InvalidArgument):
        TopologyCriterion("qvar", order="sideways")


def _tables(rng, n, A):
    t = ValueTables(A)
    keys = tuple(ObsKey(i, 0) for i in range(n))
    for k in keys:
        t.set_utility(k, rng.normal(size=A))
    for i in range(n):
        for j in range(i + 1, n):
            t.set_payoff(keys[i], keys[j], rng.normal(size=(A, A)) * rng.uniform(0.1, 3.0))
    return t, keys


def test_score_is_symmetrized_max():
    t = ValueTables(2)
    k0, k1 = ObsKey(0, 0), ObsKey(1, 0)
    # rows vary across partner's action for agent 0 only; transpose has column variance
    t.set_payoff(k0, k1, [[0.0, 4.0], [0.0, 0.0]])
    z = pair_scores(t, (k0, k1), "qvar")
    # zeta_01 = var(0, 4) = 4; zeta_10 = max(var(0,0), var(4,0)) = 4
    assert z.tolist() == [4.0]
    t.set_payoff(k0, k1, [[0.0, 0.0], [2.0, 2.0]])
    # zeta_01 = 0, zeta_10 = var(0, 2) = 1
    assert pair_scores(t, (k0, k1), "qvar").tolist() == [1.0]


def test_ties_prefer_lexicographically_smaller_pairs():
    t = ValueTables(2)
    keys = tuple(ObsKey(i, 0) for i in range(3))
    for i in range(3):
        for j in range(i + 1, 3):
            t.set_payoff(keys[i], keys[j], [[0.0, 2.0], [0.0, 0.0]])
    g = select_topology(t, keys, TopologyCriterion("qvar", 2 / 3))
    assert g.edges == ((0, 1), (0, 2))


def test_descending_and_ascending_pick_extremes():
    t = ValueTables(2)
    keys = tuple(ObsKey(i, 0) for i in range(3))
    scales = {(0, 1): 1.0, (0, 2): 3.0, (1, 2): 2.0}
    for (i, j), s in scales.items():
        t.set_payoff(keys[i], keys[j], [[0.0, s], [0.0, 0.0]])
    assert select_topology(t, keys, TopologyCriterion("qvar", 1 / 3)).edges == ((0, 2),)
    assert select_topology(t, keys, TopologyCriterion("qvar", 1 / 3, order="ascending")).edges == ((0, 1),)


def test_full_none_random():
    t, keys = _tables(np.random.default_rng(0), 5, 3)
    assert select_topology(t, keys, TopologyCriterion("full", 0.1)).n_edges == 10
    assert select_topology(t, keys, TopologyCriterion("none", 0.9)).n_edges == 0
    g1 = select_topology(t, keys, TopologyCriterion("random", 0.5, rng_seed=3))
    g2 = select_topology(t, keys, TopologyCriterion("random", 0.5, rng_seed=3))
    assert g1 == g2 and g1.n_edges == 5


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 7), st.floats(0.0, 1.0), st.sampled_from(["qvar", "delta_max", "delta_var"]))
def test_selected_edges_dominate_the_rest(seed, n, lam, kind):
    t, keys = _tables(np.random.default_rng(seed), n, 3)
    crit = TopologyCriterion(kind, lam)
    g = select_topology(t, keys, crit)
    assert g.n_edges == edge_budget(n, lam)
    z = pair_scores(t, keys, kind)
    mask = g.pair_mask()
    if mask.any() and (~mask).any():
        assert z[mask].min() >= z[~mask].max()


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**31))
def test_random_mask_budget(n_pairs, seed):
    rng = np.random.default_rng(seed)
    b = int(rng.integers(n_pairs + 1))
    assert random_mask(n_pairs, b, rng).sum() == b


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 7), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_budget_monotone_in_lambda(n, a, b):
    lo, hi = sorted((a, b))
    assert edge_budget(n, lo) <= edge_budget(n, hi)
