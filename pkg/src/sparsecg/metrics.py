"""Communication accounting, learning-curve stability and the edge-removal study."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgument, NumericFailure
from .graph import CoordinationGraph, pair_index
from .values import Prop1Inputs, prop1_lower_bound

SMOOTHERS = ("kalman", "ema", "dema", "midpoint")


def wire_messages(n_agents: int, n_edges: float, iterations: int, local_unary: bool = True):
    """Messages sent per Max-Sum selection: one per direction per factor-graph link per round.

    With ``local_unary`` the agent/unary-factor links stay on the agent and are not counted.
    """
    links = 2 * n_edges + (0 if local_unary else n_agents)
    return iterations * 2 * links


@dataclass(frozen=True)
class CommReport:
    edges_used: int
    messages_per_selection: int
    saved_fraction: float


def comm_cost(g: CoordinationGraph, iterations: int, local_unary: bool = True) -> CommReport:
    if iterations < 1:
        raise InvalidArgument("iterations must be >= 1")
    m = g.max_edges
    saved = 1.0 - g.n_edges / m if m else 0.0
    return CommReport(g.n_edges, int(wire_messages(g.n_agents, g.n_edges, iterations, local_unary)), saved)


@dataclass(frozen=True)
class StabilityReport:
    method: str
    distance: float


def _ema(x: np.ndarray, alpha: float) -> np.ndarray:
    out = np.empty_like(x)
    s = x[0]
    for t, v in enumerate(x):
        # incremental form keeps constant inputs exactly constant
        s = s + alpha * (v - s)
        out[t] = s
    return out


def _kalman(x: np.ndarray, q: float, r: float) -> np.ndarray:
    """Local-level Kalman filter followed by a Rauch-Tung-Striebel backward pass."""
    T = len(x)
    xf = np.empty(T)
    pf = np.empty(T)
    xp = np.empty(T)
    pp = np.empty(T)
    s, p = x[0], r
    for t in range(T):
        xp[t], pp[t] = s, p + q
        k = pp[t] / (pp[t] + r)
        s = xp[t] + k * (x[t] - xp[t])
        p = (1.0 - k) * pp[t]
        xf[t], pf[t] = s, p
    xs = xf.copy()
    for t in range(T - 2, -1, -1):
        c = pf[t] / pp[t + 1]
        xs[t] = xf[t] + c * (xs[t + 1] - xp[t + 1])
    return xs


def _midpoint(x: np.ndarray, window: int) -> np.ndarray:
    T = len(x)
    w = min(window, T)
    out = np.empty(T)
    for t in range(T):
        lo = min(max(t - (w - 1) // 2, 0), T - w)
        seg = x[lo : lo + w]
        out[t] = (seg.max() + seg.min()) / 2.0
    return out


def smooth(curve, method: str, span: float = 10.0, window: int = 5,
           process_var: float = 1e-4, measurement_var: float = 1e-1) -> np.ndarray:
    x = np.asarray(curve, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise InvalidArgument("curve must be a 1-D sequence of length >= 2")
    if method == "kalman":
        return _kalman(x, process_var, measurement_var)
    if method in ("ema", "dema"):
        if span < 1:
            raise InvalidArgument("span must be >= 1")
        alpha = 2.0 / (span + 1.0)
        e1 = _ema(x, alpha)
        return e1 if method == "ema" else 2.0 * e1 - _ema(e1, alpha)
    if method == "midpoint":
        if window < 1:
            raise InvalidArgument("window must be >= 1")
        return _midpoint(x, window)
    raise InvalidArgument(f"unknown smoother {method!r}; expected one of {SMOOTHERS}")


def stability_distance(curve, method: str, **params) -> StabilityReport:
    """Root-sum-square distance between a curve and its smoothed version."""
    x = np.asarray(curve, dtype=float)
    xs = smooth(x, method, **params)
    return StabilityReport(method, float(math.sqrt(((x - xs) ** 2).sum())))


# -- edge-removal study ---------------------------------------------------------

PROP1_COLUMNS = ("instance", "edge_i", "edge_j", "zeta", "changed", "bound")


def _endpoint_bound(m_to_j, q, m_i_to_e, zeta, n_actions):
    """Bound for the agent on the column side of ``q`` (rows belong to the other endpoint)."""
    r = q + m_i_to_e[:, None]
    A = float((r.max(axis=0)[None, :] - r).max())
    try:
        return prop1_lower_bound(Prop1Inputs(tuple(m_to_j), zeta, A, n_actions))
    except NumericFailure:
        return float("nan")


def _instance_rows(U, P, pi, pj, iters, n_actions):
    n_pairs = len(pi)
    full = np.ones(n_pairs, dtype=np.bool_)
    u_scale, p_scale = 1.0 / U.shape[0], 1.0 / n_pairs
    a0, _, _, a2f, f2a, _ = kernels.max_sum(U, P, pi, pj, full, iters, True, False, u_scale, p_scale)
    z = kernels.zeta_pairs(U, P, pi, pj, kernels.KIND_QVAR)
    out = []
    for p in range(n_pairs):
        mask = full.copy()
        mask[p] = False
        a1, _, _, _, _, _ = kernels.max_sum(U, P, pi, pj, mask, iters, True, False, u_scale, p_scale)
        i, j = int(pi[p]), int(pj[p])
        changed = bool(a0[i] != a1[i] or a0[j] != a1[j])
        # the bound is not scale invariant; express the whole problem in raw payoff
        # units (messages scale linearly with the factor scale)
        q = P[p]
        m_in = f2a[p] / p_scale
        m_out = a2f[p] / p_scale
        zs = float(z[p])
        b_j = _endpoint_bound(m_in[1], q, m_out[0], zs, n_actions)
        b_i = _endpoint_bound(m_in[0], q.T, m_out[1], zs, n_actions)
        out.append((i, j, float(z[p]), changed, b_i + b_j - 1.0))
    return out


def _bootstrap_ci(x: np.ndarray, rng: np.random.Generator, n_boot: int = 1000, level: float = 0.95):
    if len(x) == 0:
        return float("nan"), float("nan")
    means = x[rng.integers(len(x), size=(n_boot, len(x)))].mean(axis=1)
    a = (1.0 - level) / 2.0
    return float(np.quantile(means, a)), float(np.quantile(means, 1.0 - a))


@dataclass
class Prop1Report:
    rows: list[dict]
    summary: list[dict]
    positive_bound: dict


def prop1_experiment(
    n_instances: int,
    n_agents: int,
    n_actions: int,
    seed: int,
    low: float = -1.0,
    high: float = 1.0,
    iterations: int = 5,
    n_bins: int = 10,
    n_boot: int = 1000,
) -> Prop1Report:
    """Remove each edge of random complete-graph instances and record whether either
    endpoint's Max-Sum action changes, next to the edge score and the bound.

    Both runs use the complete graph's value scaling so the removal only drops a
    term; messages for the bound are those of the final round (non-anytime). The
    bound for the pair is the union bound over its two endpoints.
    """
    if n_instances < 1 or n_agents < 2 or n_actions < 1 or n_bins < 1:
        raise InvalidArgument("prop1_experiment needs positive sizes and at least two agents")
    if not high > low:
        raise InvalidArgument("need high > low")
    rng = np.random.default_rng(seed)
    pi, pj = pair_index(n_agents)
    rows = []
    for k in range(n_instances):
        U = rng.uniform(low, high, size=(n_agents, n_actions))
        P = rng.uniform(low, high, size=(len(pi), n_actions, n_actions))
        for i, j, z, changed, bound in _instance_rows(U, P, pi, pj, iterations, n_actions):
            rows.append({"instance": k, "edge_i": i, "edge_j": j, "zeta": z,
                         "changed": int(changed), "bound": bound})

    z = np.array([r["zeta"] for r in rows])
    unchanged = np.array([1.0 - r["changed"] for r in rows])
    bound = np.array([r["bound"] for r in rows])
    edges = np.quantile(z, np.linspace(0.0, 1.0, n_bins + 1))
    bins = np.clip(np.searchsorted(edges, z, side="right") - 1, 0, n_bins - 1)
    boot_rng = np.random.default_rng([seed, 1])
    summary = []
    for b in range(n_bins):
        sel = bins == b
        lo, hi = _bootstrap_ci(unchanged[sel], boot_rng, n_boot)
        summary.append({
            "bin": b,
            "zeta_lo": float(edges[b]),
            "zeta_hi": float(edges[b + 1]),
            "count": int(sel.sum()),
            "unchanged_freq": float(unchanged[sel].mean()) if sel.any() else float("nan"),
            "ci_lo": lo,
            "ci_hi": hi,
            "bound_mean": float(np.nanmean(bound[sel])) if sel.any() else float("nan"),
            "bound_max": float(np.nanmax(bound[sel])) if sel.any() else float("nan"),
        })
    pos = bound > 0
    lo, hi = _bootstrap_ci(unchanged[pos], boot_rng, n_boot)
    positive = {
        "count": int(pos.sum()),
        "unchanged_freq": float(unchanged[pos].mean()) if pos.any() else float("nan"),
        "ci_lo": lo,
        "ci_hi": hi,
        "bound_max": float(bound[pos].max()) if pos.any() else float("nan"),
    }
    return Prop1Report(rows, summary, positive)
