import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsecg import (
    CapacityError,
    CoordinationGraph,
    InvalidArgument,
    build_complete_graph,
    empty_graph,
    evaluate_q_tot,
    exact_joint_argmax,
    run_max_sum,
    to_factor_graph,
)
from sparsecg.maxsum import utility_argmax

from conftest import brute_force, random_tree, random_values


def test_two_agent_hand_example():
    # Q(a) = (u0 + u1) / 2 + p: (0,0)=0.5 (0,1)=1 (1,0)=0 (1,1)=3.5
    g = CoordinationGraph.from_edges(2, [(0, 1)])
    U = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    P = {(0, 1): np.array([[0.0, 0.0], [0.0, 3.0]])}
    a, _ = run_max_sum(to_factor_graph(g), U, P, iterations=3)
    assert a == (1, 1)
    assert evaluate_q_tot(g, U, P, a) == pytest.approx(3.5)
    assert exact_joint_argmax(g, U, P) == ((1, 1), pytest.approx(3.5))


def test_first_round_messages():
    g = CoordinationGraph.from_edges(2, [(0, 1)])
    U = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    P = {(0, 1): np.array([[0.0, 0.0], [0.0, 3.0]])}
    _, st_ = run_max_sum(to_factor_graph(g), U, P, iterations=1, normalize=False)
    # zero incoming messages: factor sends the row/column max of p / |E|
    np.testing.assert_allclose(st_.factor_to_agent[(2, 0)], [0.0, 3.0])
    np.testing.assert_allclose(st_.factor_to_agent[(2, 1)], [0.0, 3.0])
    # agent -> factor carries only the scaled unary term in round one
    np.testing.assert_allclose(st_.agent_to_factor[(0, 2)], [0.5, 0.0])


def test_normalized_messages_are_centred():
    rng = np.random.default_rng(0)
    g = build_complete_graph(4)
    U, P = random_values(rng, g, 3)
    _, st_ = run_max_sum(to_factor_graph(g), U, P, iterations=4)
    for (src, dst), m in st_.agent_to_factor.items():
        assert abs(m.mean()) < 1e-12


def test_payoffs_accept_reversed_keys():
    g = CoordinationGraph.from_edges(2, [(0, 1)])
    U = [np.zeros(2), np.zeros(2)]
    M = np.array([[0.0, 5.0], [0.0, 0.0]])
    a1, _ = run_max_sum(to_factor_graph(g), U, {(0, 1): M})
    a2, _ = run_max_sum(to_factor_graph(g), U, {(1, 0): M.T})
    assert a1 == a2 == (0, 1)


def test_edgeless_is_utility_argmax():
    U = [np.array([0.0, 2.0, 1.0]), np.array([3.0, 0.0, 3.0])]
    a, _ = run_max_sum(to_factor_graph(empty_graph(2)), U, {})
    assert a == utility_argmax(U) == (1, 0)


def test_ties_go_to_lowest_index():
    g = build_complete_graph(3)
    U = [np.zeros(3)] * 3
    P = {e: np.zeros((3, 3)) for e in g.edges}
    assert run_max_sum(to_factor_graph(g), U, P)[0] == (0, 0, 0)
    assert exact_joint_argmax(g, U, P)[0] == (0, 0, 0)


def test_invalid_inputs():
    g = build_complete_graph(2)
    fg = to_factor_graph(g)
    with pytest.raises(InvalidArgument):
        run_max_sum(fg, [np.zeros(2)] * 2, {(0, 1): np.zeros((2, 2))}, iterations=0)
    with pytest.raises(InvalidArgument):
        run_max_sum(fg, [np.zeros(2)] * 2, {})
    with pytest.raises(InvalidArgument):
        run_max_sum(fg, [np.zeros(2), np.zeros(3)], {(0, 1): np.zeros((2, 3))})
    with pytest.raises(InvalidArgument):
        evaluate_q_tot(g, [np.zeros(2)] * 2, {(0, 1): np.zeros((2, 2))}, (0,))


def test_enumeration_cap():
    g = empty_graph(8)
    with pytest.raises(CapacityError):
        exact_joint_argmax(g, [np.zeros(10)] * 8, {}, cap=1000)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6), st.integers(1, 4))
def test_tree_exactness(seed, n, A):
    rng = np.random.default_rng(seed)
    g = random_tree(rng, n)
    U, P = random_values(rng, g, A)
    a, _ = run_max_sum(to_factor_graph(g), U, P, iterations=2 * n, normalize=True, evaluate_anytime=False)
    assert evaluate_q_tot(g, U, P, a) == pytest.approx(brute_force(g, U, P), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 5), st.integers(1, 4), st.integers(1, 6))
def test_anytime_never_below_utility_argmax(seed, n, A, iters):
    rng = np.random.default_rng(seed)
    g = build_complete_graph(n)
    U, P = random_values(rng, g, A)
    a, _ = run_max_sum(to_factor_graph(g), U, P, iterations=iters)
    assert evaluate_q_tot(g, U, P, a) >= evaluate_q_tot(g, U, P, utility_argmax(U)) - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 5), st.integers(1, 3))
def test_exact_argmax_matches_loop_oracle(seed, n, A):
    rng = np.random.default_rng(seed)
    g = build_complete_graph(n)
    U, P = random_values(rng, g, A)
    a, v = exact_joint_argmax(g, U, P)
    assert v == pytest.approx(brute_force(g, U, P), abs=1e-12)
    assert evaluate_q_tot(g, U, P, a) == pytest.approx(v, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 10.0))
def test_scale_equivariance(seed, c):
    # scaling every potential by c > 0 leaves the chosen action unchanged
    rng = np.random.default_rng(seed)
    g = build_complete_graph(4)
    U, P = random_values(rng, g, 3)
    a1, _ = run_max_sum(to_factor_graph(g), U, P)
    a2, _ = run_max_sum(to_factor_graph(g), [u * c for u in U], {e: m * c for e, m in P.items()})
    assert a1 == a2
