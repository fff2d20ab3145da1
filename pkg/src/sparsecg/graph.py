"""Coordination graphs and their bipartite factor-graph form."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

import numpy as np

from .errors import InvalidArgument

Edge = tuple[int, int]


def canonical_edge(i: int, j: int) -> Edge:
    if i == j:
        raise InvalidArgument(f"self-loop on agent {i}")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class CoordinationGraph:
    """Agents ``0..n_agents-1`` plus undirected edges stored as sorted ``(i, j)`` with ``i < j``."""

    n_agents: int
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        if self.n_agents < 1:
            raise InvalidArgument(f"n_agents must be >= 1, got {self.n_agents}")
        canon = set()
        for i, j in self.edges:
            if not (0 <= i < self.n_agents and 0 <= j < self.n_agents):
                raise InvalidArgument(f"edge ({i}, {j}) out of range for {self.n_agents} agents")
            e = canonical_edge(int(i), int(j))
            if e in canon:
                raise InvalidArgument(f"duplicate edge {e}")
            canon.add(e)
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @classmethod
    def from_edges(cls, n_agents: int, edges: Iterable[tuple[int, int]]) -> "CoordinationGraph":
        return cls(n_agents, tuple(canonical_edge(int(i), int(j)) for i, j in edges))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def max_edges(self) -> int:
        return self.n_agents * (self.n_agents - 1) // 2

    def has_edge(self, i: int, j: int) -> bool:
        return canonical_edge(i, j) in set(self.edges)

    def neighbors(self, i: int) -> list[int]:
        out = [b for a, b in self.edges if a == i] + [a for a, b in self.edges if b == i]
        return sorted(out)

    def without_edge(self, i: int, j: int) -> "CoordinationGraph":
        e = canonical_edge(i, j)
        return CoordinationGraph(self.n_agents, tuple(x for x in self.edges if x != e))

    def pair_mask(self) -> np.ndarray:
        """Boolean mask over all lexicographic pairs (the layout used by the kernels)."""
        pi, pj = pair_index(self.n_agents)
        lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(zip(pi, pj))}
        mask = np.zeros(len(pi), dtype=np.bool_)
        for e in self.edges:
            mask[lookup[e]] = True
        return mask

    def to_text(self) -> str:
        lines = [f"n={self.n_agents}"] + [f"{i} {j}" for i, j in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CoordinationGraph":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("n="):
            raise InvalidArgument("edge list must start with a 'n=<n_agents>' header")
        n = int(lines[0][2:])
        edges = []
        for ln in lines[1:]:
            parts = ln.split()
            if len(parts) != 2:
                raise InvalidArgument(f"bad edge line: {ln!r}")
            edges.append((int(parts[0]), int(parts[1])))
        return cls.from_edges(n, edges)


def pair_index(n_agents: int) -> tuple[np.ndarray, np.ndarray]:
    """All unordered pairs ``i < j`` in lexicographic order, as two int arrays."""
    pairs = list(combinations(range(n_agents), 2))
    if not pairs:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    arr = np.asarray(pairs, dtype=np.int64)
    return arr[:, 0].copy(), arr[:, 1].copy()


def build_complete_graph(n_agents: int) -> CoordinationGraph:
    if n_agents < 1:
        raise InvalidArgument(f"n_agents must be >= 1, got {n_agents}")
    return CoordinationGraph(n_agents, tuple(combinations(range(n_agents), 2)))


def empty_graph(n_agents: int) -> CoordinationGraph:
    return CoordinationGraph(n_agents, ())


@dataclass(frozen=True)
class FactorGraph:
    """Bipartite agent/factor structure.

    Factor ids ``0..n_agents-1`` are the unary factors (factor ``i`` touches agent
    ``i``); the rest are pairwise factors in the graph's lexicographic edge order.
    """

    agent_nodes: tuple[int, ...]
    factor_nodes: tuple[int, ...]
    factor_scope: tuple[tuple[int, ...], ...]
    agent_factors: tuple[tuple[int, ...], ...] = field(repr=False)
    graph: CoordinationGraph = field(repr=False)

    @property
    def n_unary(self) -> int:
        return len(self.agent_nodes)

    @property
    def n_pairwise(self) -> int:
        return len(self.factor_nodes) - len(self.agent_nodes)

    def links(self) -> list[tuple[int, int]]:
        """All (agent, factor) links, agents ascending then factors ascending."""
        return [(i, f) for i in self.agent_nodes for f in self.agent_factors[i]]

    def pairwise_factor(self, edge: Edge) -> int:
        return self.n_unary + self.graph.edges.index(canonical_edge(*edge))


def to_factor_graph(g: CoordinationGraph) -> FactorGraph:
    n = g.n_agents
    scope: list[tuple[int, ...]] = [(i,) for i in range(n)]
    scope += [tuple(e) for e in g.edges]
    per_agent: list[list[int]] = [[i] for i in range(n)]
    for k, (i, j) in enumerate(g.edges):
        per_agent[i].append(n + k)
        per_agent[j].append(n + k)
    return FactorGraph(
        agent_nodes=tuple(range(n)),
        factor_nodes=tuple(range(len(scope))),
        factor_scope=tuple(scope),
        agent_factors=tuple(tuple(f) for f in per_agent),
        graph=g,
    )


def is_acyclic(g: CoordinationGraph) -> bool:
    """True iff the undirected edge set is a forest (union-find over edges)."""
    parent = list(range(g.n_agents))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in g.edges:
        ri, rj = find(i), find(j)
        if ri == rj:
            return False
        parent[ri] = rj
    return True
