"""Max-Sum action selection on factor graphs plus a brute-force oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .errors import CapacityError, InvalidArgument, NumericFailure
from .graph import CoordinationGraph, FactorGraph, canonical_edge

JointAction = tuple[int, ...]

DEFAULT_ITERATIONS = 5
DEFAULT_ENUM_CAP = 10**7


@dataclass
class MessageState:
    agent_to_factor: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    factor_to_agent: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    iteration: int = 0


def _as_utilities(utilities, n_agents: int) -> np.ndarray:
    rows = [np.asarray(u, dtype=float) for u in utilities]
    if len(rows) != n_agents:
        raise InvalidArgument(f"expected {n_agents} utility vectors, got {len(rows)}")
    sizes = {r.shape for r in rows}
    if len(sizes) != 1 or len(rows[0].shape) != 1:
        raise InvalidArgument("all agents must share one action-set size")
    return np.stack(rows)


def _as_payoffs(payoffs: Mapping, edges: Sequence[tuple[int, int]], n_actions: int) -> np.ndarray:
    canon = {}
    for (i, j), m in payoffs.items():
        m = np.asarray(m, dtype=float)
        if i > j:
            m = m.T
        canon[canonical_edge(i, j)] = m
    P = np.zeros((len(edges), n_actions, n_actions))
    for k, e in enumerate(edges):
        if e not in canon:
            raise InvalidArgument(f"missing payoff for edge {e}")
        if canon[e].shape != (n_actions, n_actions):
            raise InvalidArgument(f"payoff for edge {e} has shape {canon[e].shape}")
        P[k] = canon[e]
    return P


def _edge_arrays(g: CoordinationGraph) -> tuple[np.ndarray, np.ndarray]:
    if not g.edges:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    arr = np.asarray(g.edges, dtype=np.int64)
    return arr[:, 0].copy(), arr[:, 1].copy()


def run_max_sum(
    fg: FactorGraph,
    utilities,
    payoffs: Mapping[tuple[int, int], np.ndarray],
    iterations: int = DEFAULT_ITERATIONS,
    normalize: bool = True,
    evaluate_anytime: bool = True,
) -> tuple[JointAction, MessageState]:
    """Run synchronous Max-Sum on ``fg`` and extract a joint action.

    Factor potentials are the scaled terms of the global value: ``q_i / |V|``
    for unary factors and ``q_ij / |E|`` for pairwise ones, so the maximized
    objective is exactly :func:`evaluate_q_tot`. All messages start at zero and
    every round reads only the previous round's messages. Agent-to-factor
    messages are mean-centred when ``normalize`` is set.

    With ``evaluate_anytime`` the result is the best joint action (by global
    value) among the utility-only argmax and the extraction after every round;
    otherwise it is the final round's extraction. Ties go to the lowest action
    index, and between equally valued anytime candidates to the earliest one.
    """
    if iterations < 1:
        raise InvalidArgument("iterations must be >= 1")
    g = fg.graph
    U = _as_utilities(utilities, g.n_agents)
    A = U.shape[1]
    P = _as_payoffs(payoffs, g.edges, A)
    pi, pj = _edge_arrays(g)
    mask = np.ones(len(pi), dtype=np.bool_)
    p_scale = 1.0 / g.n_edges if g.n_edges else 0.0
    a, _, status, a2f, f2a, a2u = kernels.max_sum(
        U, P, pi, pj, mask, int(iterations), bool(normalize), bool(evaluate_anytime), 1.0 / g.n_agents, p_scale
    )
    if status != kernels.STATUS_OK:
        raise NumericFailure("Max-Sum produced a non-finite message")

    state = MessageState(iteration=int(iterations))
    n = g.n_agents
    for i in range(n):
        state.agent_to_factor[(i, i)] = a2u[i].copy()
        state.factor_to_agent[(i, i)] = U[i] / n
    for k, (i, j) in enumerate(g.edges):
        f = n + k
        state.agent_to_factor[(i, f)] = a2f[k, 0].copy()
        state.agent_to_factor[(j, f)] = a2f[k, 1].copy()
        state.factor_to_agent[(f, i)] = f2a[k, 0].copy()
        state.factor_to_agent[(f, j)] = f2a[k, 1].copy()
    return tuple(int(x) for x in a), state


def evaluate_q_tot(g: CoordinationGraph, utilities, payoffs: Mapping, a: Sequence[int]) -> float:
    """Mean utility plus mean payoff over the graph's edges (0 when edgeless)."""
    if len(a) != g.n_agents:
        raise InvalidArgument("joint action length does not match the graph")
    su = 0.0
    for i, u in enumerate(utilities):
        su += float(np.asarray(u)[a[i]])
    sp = 0.0
    for i, j in g.edges:
        if (i, j) in payoffs:
            sp += float(np.asarray(payoffs[(i, j)])[a[i], a[j]])
        else:
            sp += float(np.asarray(payoffs[(j, i)])[a[j], a[i]])
    p_scale = 1.0 / g.n_edges if g.n_edges else 0.0
    return su * (1.0 / g.n_agents) + sp * p_scale


def exact_joint_argmax(
    g: CoordinationGraph, utilities, payoffs: Mapping, cap: int = DEFAULT_ENUM_CAP
) -> tuple[JointAction, float]:
    """Enumerate every joint action; ties go to the lexicographically smallest."""
    us = [np.asarray(u, dtype=float) for u in utilities]
    sizes = [len(u) for u in us]
    total = int(np.prod(sizes, dtype=np.float64))
    if total > cap:
        raise CapacityError(f"{total} joint actions exceed the enumeration cap {cap}")
    n = g.n_agents
    su = np.zeros(sizes)
    for i, u in enumerate(us):
        shape = [1] * n
        shape[i] = sizes[i]
        su = su + u.reshape(shape)
    sp = np.zeros(sizes)
    for i, j in g.edges:
        m = np.asarray(payoffs[(i, j)] if (i, j) in payoffs else np.asarray(payoffs[(j, i)]).T, dtype=float)
        shape = [1] * n
        shape[i], shape[j] = sizes[i], sizes[j]
        sp = sp + m.reshape(shape)
    p_scale = 1.0 / g.n_edges if g.n_edges else 0.0
    q = su * (1.0 / n) + sp * p_scale
    flat = int(np.argmax(q))
    best = tuple(int(x) for x in np.unravel_index(flat, sizes))
    return best, float(q.flat[flat])


def utility_argmax(utilities) -> JointAction:
    return tuple(int(np.argmax(np.asarray(u))) for u in utilities)
