import itertools

import numpy as np
import pytest

from sparsecg.graph import CoordinationGraph


def random_tree(rng: np.random.Generator, n: int) -> CoordinationGraph:
    """Random spanning tree, or a forest when some attachments are dropped."""
    edges = []
    for v in range(1, n):
        if rng.random() < 0.9:
            edges.append((int(rng.integers(v)), v))
    return CoordinationGraph.from_edges(n, edges)


def random_values(rng: np.random.Generator, g: CoordinationGraph, n_actions: int, scale: float = 1.0):
    U = [rng.normal(0.0, scale, n_actions) for _ in range(g.n_agents)]
    P = {e: rng.normal(0.0, scale, (n_actions, n_actions)) for e in g.edges}
    return U, P


def brute_force(g: CoordinationGraph, U, P) -> float:
    """Independent oracle: plain loop over every joint action."""
    n = g.n_agents
    best = -np.inf
    for a in itertools.product(range(len(U[0])), repeat=n):
        v = sum(U[i][a[i]] for i in range(n)) / n
        if g.edges:
            v += sum(P[(i, j)][a[i], a[j]] for i, j in g.edges) / g.n_edges
        best = max(best, v)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: dict[int, str] = {}


def record(number: int, passed: bool, detail: str) -> None:
    """Store one acceptance verdict; the terminal summary prints them all."""
    line = f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
