"""Context-dependent sparse topologies from edge scores and a budget."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InvalidArgument
from .graph import CoordinationGraph, build_complete_graph, empty_graph, pair_index
from .values import ObsKey, ValueTables

CRITERIA = ("qvar", "delta_max", "delta_var", "random", "full", "none")
_SCORE_KIND = {
    "qvar": kernels.KIND_QVAR,
    "delta_max": kernels.KIND_DELTA_MAX,
    "delta_var": kernels.KIND_DELTA_VAR,
}


@dataclass(frozen=True)
class TopologyCriterion:
    kind: str = "qvar"
    lam: float = 0.5
    rng_seed: int = 0
    # "descending" keeps the highest-scoring edges; "ascending" the lowest (ablation only)
    order: str = "descending"

    def __post_init__(self):
        if self.kind not in CRITERIA:
            raise InvalidArgument(f"unknown criterion {self.kind!r}; expected one of {CRITERIA}")
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidArgument(f"lambda must lie in [0, 1], got {self.lam}")
        if self.order not in ("descending", "ascending"):
            raise InvalidArgument(f"unknown edge order {self.order!r}")

    @property
    def score_kind(self) -> int:
        return _SCORE_KIND.get(self.kind, kernels.KIND_MASK)

    @property
    def uses_scores(self) -> bool:
        return self.kind in _SCORE_KIND

    def budget(self, n_agents: int) -> int:
        if self.kind == "full":
            return n_agents * (n_agents - 1) // 2
        if self.kind == "none":
            return 0
        return edge_budget(n_agents, self.lam)


def edge_budget(n: int, lam: float) -> int:
    """``round(lam * n(n-1)/2)`` with round-half-even, clamped to the complete graph."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    if not 0.0 <= lam <= 1.0:
        raise InvalidArgument("lambda must lie in [0, 1]")
    m = n * (n - 1) // 2
    # round to 9 places first so representation noise (0.3 * 15 = 4.499...) cannot flip the half-even rule
    b = round(round(lam * m, 9))
    return int(min(max(b, 0), m))


def pair_scores(tables: ValueTables, keys: Sequence[ObsKey], kind: str) -> np.ndarray:
    """Symmetrized score of every lexicographic pair for the given context."""
    n = len(keys)
    pi, pj = pair_index(n)
    U = np.stack([tables.utility(k) for k in keys])
    P = np.stack([tables.payoff(keys[i], keys[j]) for i, j in zip(pi, pj)]) if len(pi) else np.zeros(
        (0, tables.n_actions, tables.n_actions)
    )
    return kernels.zeta_pairs(U, P, pi, pj, _SCORE_KIND[kind])


def random_mask(n_pairs: int, budget: int, rng: np.random.Generator) -> np.ndarray:
    mask = np.zeros(n_pairs, dtype=np.bool_)
    mask[rng.permutation(n_pairs)[:budget]] = True
    return mask


def select_topology(
    tables: ValueTables,
    keys: Sequence[ObsKey],
    crit: TopologyCriterion,
    rng: np.random.Generator | None = None,
) -> CoordinationGraph:
    """Build the coordination graph for one joint observation.

    ``tables`` should be the target snapshot. Score-based kinds rank every
    unordered pair by ``max(zeta_ij, zeta_ji)`` and keep the top
    :func:`edge_budget` pairs, ties going to the lexicographically smaller
    pair. ``random`` draws the budget uniformly from ``rng`` (seeded from
    ``crit.rng_seed`` if none is given).
    """
    n = len(keys)
    if crit.kind == "none":
        return empty_graph(n)
    budget = crit.budget(n)
    if crit.kind == "full" or budget == n * (n - 1) // 2:
        return build_complete_graph(n)
    pi, pj = pair_index(n)
    if crit.kind == "random":
        rng = rng if rng is not None else np.random.default_rng(crit.rng_seed)
        mask = random_mask(len(pi), budget, rng)
    else:
        z = pair_scores(tables, keys, crit.kind)
        mask = kernels.select_mask(z, budget, crit.order == "descending")
    return CoordinationGraph(n, tuple((int(pi[p]), int(pj[p])) for p in np.flatnonzero(mask)))
