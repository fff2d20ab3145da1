"""Tabular utility/payoff estimates, edge scores and sparseness losses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import CapacityError, InvalidArgument, NumericFailure
from .graph import CoordinationGraph

DEFAULT_ENTRY_CAP = 5_000_000
CHECKPOINT_VERSION = 1

SPARSE_VARIANTS = ("qvar", "abs_delta", "delta_var")


class ObsKey(NamedTuple):
    agent_id: int
    encoded: int


class ValueTables:
    """Lazily allocated utility and pairwise payoff tables.

    Utilities are stored per :class:`ObsKey`; payoffs per pair of keys in
    canonical order (lower agent id first), so a query with the agents swapped
    reads the transposed entry. Unseen entries read as zero. Rows are interned
    in first-seen order; the raw arrays (``u``, ``p``) are what the kernels
    index into.
    """

    def __init__(self, n_actions: int, entry_cap: int = DEFAULT_ENTRY_CAP):
        if n_actions < 1:
            raise InvalidArgument("n_actions must be >= 1")
        self.n_actions = int(n_actions)
        self.entry_cap = int(entry_cap)
        self.readonly = False
        self._rows: dict[ObsKey, int] = {}
        self._keys: list[ObsKey] = []
        self._pair_rows: dict[tuple[int, int], int] = {}
        self._pairs: list[tuple[int, int]] = []
        self._u = np.zeros((64, n_actions))
        self._p = np.zeros((64, n_actions, n_actions))

    @property
    def n_rows(self) -> int:
        return len(self._keys)

    @property
    def n_pair_rows(self) -> int:
        return len(self._pairs)

    @property
    def u(self) -> np.ndarray:
        return self._u[: self.n_rows]

    @property
    def p(self) -> np.ndarray:
        return self._p[: self.n_pair_rows]

    @property
    def n_entries(self) -> int:
        return self.n_rows * self.n_actions + self.n_pair_rows * self.n_actions**2

    def _check_writable(self):
        if self.readonly:
            raise InvalidArgument("tables snapshot is read-only")

    def _reserve(self, extra_entries: int):
        if self.n_entries + extra_entries > self.entry_cap:
            raise CapacityError(f"value tables would exceed {self.entry_cap} entries")

    def row(self, key: ObsKey, allocate: bool = False) -> int:
        r = self._rows.get(key, -1)
        if r >= 0 or not allocate:
            return r
        self._check_writable()
        self._reserve(self.n_actions)
        r = len(self._keys)
        if r == self._u.shape[0]:
            self._u = np.concatenate([self._u, np.zeros_like(self._u)])
        self._rows[key] = r
        self._keys.append(key)
        return r

    def pair_row_from_rows(self, r_lo: int, r_hi: int, allocate: bool = False) -> int:
        """Payoff row for two utility rows already in canonical (lower agent first) order."""
        k = (r_lo, r_hi)
        pr = self._pair_rows.get(k, -1)
        if pr >= 0 or not allocate:
            return pr
        self._check_writable()
        self._reserve(self.n_actions**2)
        pr = len(self._pairs)
        if pr == self._p.shape[0]:
            self._p = np.concatenate([self._p, np.zeros_like(self._p)])
        self._pair_rows[k] = pr
        self._pairs.append(k)
        return pr

    def pair_row(self, key_i: ObsKey, key_j: ObsKey, allocate: bool = False) -> tuple[int, bool]:
        """``(row, transposed)``; ``transposed`` is set when ``key_i`` is the higher agent."""
        if key_i.agent_id == key_j.agent_id:
            raise InvalidArgument("payoffs are defined between distinct agents")
        swap = key_i.agent_id > key_j.agent_id
        lo, hi = (key_j, key_i) if swap else (key_i, key_j)
        r_lo = self.row(lo, allocate)
        r_hi = self.row(hi, allocate)
        if r_lo < 0 or r_hi < 0:
            return -1, swap
        return self.pair_row_from_rows(r_lo, r_hi, allocate), swap

    def utility(self, key: ObsKey) -> np.ndarray:
        r = self.row(key)
        return self._u[r].copy() if r >= 0 else np.zeros(self.n_actions)

    def payoff(self, key_i: ObsKey, key_j: ObsKey) -> np.ndarray:
        """Payoff matrix with rows indexed by ``key_i``'s agent's actions."""
        pr, swap = self.pair_row(key_i, key_j)
        if pr < 0:
            return np.zeros((self.n_actions, self.n_actions))
        m = self._p[pr]
        return (m.T if swap else m).copy()

    def set_utility(self, key: ObsKey, values) -> None:
        self._check_writable()
        r = self.row(key, allocate=True)
        # the row call may grow the buffer, so index only afterwards
        self._u[r] = np.asarray(values, dtype=float)

    def set_payoff(self, key_i: ObsKey, key_j: ObsKey, matrix) -> None:
        self._check_writable()
        pr, swap = self.pair_row(key_i, key_j, allocate=True)
        m = np.asarray(matrix, dtype=float)
        self._p[pr] = m.T if swap else m

    def keys(self) -> list[ObsKey]:
        return list(self._keys)

    def pair_keys(self) -> list[tuple[ObsKey, ObsKey]]:
        return [(self._keys[a], self._keys[b]) for a, b in self._pairs]

    def snapshot(self) -> "ValueTables":
        """Independent read-only deep copy (the target tables)."""
        snap = ValueTables.__new__(ValueTables)
        snap.n_actions = self.n_actions
        snap.entry_cap = self.entry_cap
        snap._rows = dict(self._rows)
        snap._keys = list(self._keys)
        snap._pair_rows = dict(self._pair_rows)
        snap._pairs = list(self._pairs)
        snap._u = self.u.copy()
        snap._p = self.p.copy()
        snap._u.flags.writeable = False
        snap._p.flags.writeable = False
        snap.readonly = True
        return snap

    def copy(self) -> "ValueTables":
        """Writable deep copy."""
        out = self.snapshot()
        out._u = out._u.copy()
        out._p = out._p.copy()
        out.readonly = False
        if out._u.shape[0] == 0:
            out._u = np.zeros((64, self.n_actions))
        if out._p.shape[0] == 0:
            out._p = np.zeros((64, self.n_actions, self.n_actions))
        return out

    def save(self, path) -> None:
        """Binary checkpoint; :meth:`load` restores identical rows and bit-exact values."""
        keys = np.asarray(self._keys, dtype=np.int64).reshape(-1, 2)
        pairs = np.asarray(self._pairs, dtype=np.int64).reshape(-1, 2)
        with open(path, "wb") as fh:
            np.savez(
                fh,
                format=np.array(f"sparsecg-tables v{CHECKPOINT_VERSION}"),
                n_actions=np.int64(self.n_actions),
                entry_cap=np.int64(self.entry_cap),
                keys=keys,
                pairs=pairs,
                u=self.u,
                p=self.p,
            )

    @classmethod
    def load(cls, path) -> "ValueTables":
        with np.load(Path(path), allow_pickle=False) as z:
            fmt = str(z["format"])
            if fmt != f"sparsecg-tables v{CHECKPOINT_VERSION}":
                raise InvalidArgument(f"unsupported checkpoint format {fmt!r}")
            t = cls(int(z["n_actions"]), int(z["entry_cap"]))
            t._keys = [ObsKey(int(a), int(b)) for a, b in z["keys"]]
            t._rows = {k: r for r, k in enumerate(t._keys)}
            t._pairs = [(int(a), int(b)) for a, b in z["pairs"]]
            t._pair_rows = {k: r for r, k in enumerate(t._pairs)}
            u, p = z["u"], z["p"]
            t._u = np.zeros((max(64, 2 * len(u)), t.n_actions))
            t._u[: len(u)] = u
            t._p = np.zeros((max(64, 2 * len(p)), t.n_actions, t.n_actions))
            t._p[: len(p)] = p
        return t


def q_tot(
    tables: ValueTables, g: CoordinationGraph, keys: Sequence[ObsKey], a: Sequence[int], all_pairs: bool = False
) -> float:
    """Global value of joint action ``a``.

    Default form: mean utility plus mean payoff over the edges of ``g`` (0 if
    edgeless). ``all_pairs`` switches to the mean over all ordered pairs,
    ignoring ``g``'s edges.
    """
    n = g.n_agents
    if len(keys) != n or len(a) != n:
        raise InvalidArgument("keys and joint action must cover every agent")
    su = 0.0
    for i in range(n):
        su += tables.utility(keys[i])[a[i]]
    if all_pairs:
        if n < 2:
            return su * (1.0 / n)
        sp = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    sp += tables.payoff(keys[i], keys[j])[a[i], a[j]]
        return su * (1.0 / n) + sp * (1.0 / (n * (n - 1)))
    sp = 0.0
    for i, j in g.edges:
        sp += tables.payoff(keys[i], keys[j])[a[i], a[j]]
    p_scale = 1.0 / g.n_edges if g.n_edges else 0.0
    return su * (1.0 / n) + sp * p_scale


def zeta_qvar(payoff_slice) -> float:
    """Largest (over own actions) population variance of the payoff across the partner's actions."""
    m = np.asarray(payoff_slice, dtype=float)
    if not np.isfinite(m).all():
        raise InvalidArgument("payoff matrix must be finite")
    return float(m.var(axis=1).max())


def delta_ij(tables: ValueTables, key_i: ObsKey, key_j: ObsKey) -> np.ndarray:
    return tables.payoff(key_i, key_j) - tables.utility(key_i)[:, None] - tables.utility(key_j)[None, :]


def zeta_delta_max(tables: ValueTables, key_i: ObsKey, key_j: ObsKey) -> float:
    return float(np.abs(delta_ij(tables, key_i, key_j)).max())


def zeta_delta_var(tables: ValueTables, key_i: ObsKey, key_j: ObsKey) -> float:
    return zeta_qvar(delta_ij(tables, key_i, key_j))


def _check_variant(variant: str):
    if variant not in SPARSE_VARIANTS:
        raise InvalidArgument(f"unknown sparseness loss {variant!r}; expected one of {SPARSE_VARIANTS}")


def _check_batch(keys):
    if len(keys) == 0:
        raise InvalidArgument("sparseness loss needs a non-empty batch")


def sparse_loss(tables: ValueTables, variant: str, keys: Sequence[Sequence[ObsKey]]) -> float:
    """Sparseness regularizer averaged over the batch.

    ``qvar`` and ``delta_var`` average ``Var_{a_j}`` of the payoff (resp. the
    utility difference) over ordered pairs and own actions;
    ``abs_delta`` averages ``|delta|`` over ordered pairs and action pairs.
    """
    _check_variant(variant)
    _check_batch(keys)
    A = tables.n_actions
    total = 0.0
    for ks in keys:
        n = len(ks)
        if n < 2:
            continue
        acc = 0.0
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                if variant == "qvar":
                    acc += tables.payoff(ks[i], ks[j]).var(axis=1).sum()
                elif variant == "delta_var":
                    acc += delta_ij(tables, ks[i], ks[j]).var(axis=1).sum()
                else:
                    acc += np.abs(delta_ij(tables, ks[i], ks[j])).sum()
        denom = n * (n - 1) * (A * A if variant == "abs_delta" else A)
        total += acc / denom
    return total / len(keys)


@dataclass
class TableGradient:
    utility: dict[ObsKey, np.ndarray] = field(default_factory=dict)
    payoff: dict[tuple[ObsKey, ObsKey], np.ndarray] = field(default_factory=dict)


def sparse_loss_grad(tables: ValueTables, variant: str, keys: Sequence[Sequence[ObsKey]]) -> TableGradient:
    """Exact gradient of :func:`sparse_loss` w.r.t. every entry it reads.

    Payoff gradients are keyed by the canonical (lower agent first) key pair.
    ``|delta|`` uses ``sign(0) = 0``.
    """
    _check_variant(variant)
    _check_batch(keys)
    A = tables.n_actions
    grad = TableGradient()
    B = len(keys)

    def add_u(k, g):
        if k in grad.utility:
            grad.utility[k] = grad.utility[k] + g
        else:
            grad.utility[k] = g.copy()

    def add_p(ki, kj, g):
        if ki.agent_id > kj.agent_id:
            ki, kj, g = kj, ki, g.T
        if (ki, kj) in grad.payoff:
            grad.payoff[(ki, kj)] = grad.payoff[(ki, kj)] + g
        else:
            grad.payoff[(ki, kj)] = g.copy()

    for ks in keys:
        n = len(ks)
        if n < 2:
            continue
        denom = n * (n - 1) * (A * A if variant == "abs_delta" else A) * B
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                if variant == "qvar":
                    m = tables.payoff(ks[i], ks[j])
                    g = 2.0 * (m - m.mean(axis=1, keepdims=True)) / A / denom
                    add_p(ks[i], ks[j], g)
                    continue
                d = delta_ij(tables, ks[i], ks[j])
                if variant == "delta_var":
                    g = 2.0 * (d - d.mean(axis=1, keepdims=True)) / A / denom
                else:
                    g = np.sign(d) / denom
                add_p(ks[i], ks[j], g)
                add_u(ks[i], -g.sum(axis=1))
                add_u(ks[j], -g.sum(axis=0))
    return grad


@dataclass(frozen=True)
class Prop1Inputs:
    """Inputs of the edge-removal bound: the message a factor sends to one endpoint,
    the edge score, the regret range ``A`` and the number of actions."""

    m: tuple[float, ...]
    zeta: float
    A_bound: float
    n_actions: int

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.ndim != 1 or len(m) == 0 or not np.isfinite(m).all():
            raise InvalidArgument("m must be a non-empty finite vector")
        for name in ("zeta", "A_bound"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InvalidArgument(f"{name} must be finite and non-negative")
        if self.n_actions < 1:
            raise InvalidArgument("n_actions must be >= 1")
        object.__setattr__(self, "m", tuple(float(x) for x in m))


def prop1_lower_bound(inp: Prop1Inputs) -> float:
    """Lower bound on the probability that removing an edge leaves the endpoint's
    greedy action unchanged. Negative values are vacuous but returned as is."""
    m = np.asarray(inp.m)
    mbar = m.mean()
    spread = (mbar - m.min()) * (m.max() - mbar)
    a2 = inp.A_bound**2
    den = inp.zeta + 2.0 * a2 + 2.0 * math.sqrt(a2 * (a2 + inp.zeta))
    if den == 0.0:
        raise NumericFailure("bound denominator is zero (zeta = 0 and A = 0)")
    return (2.0 / inp.n_actions) * (spread / den**2 - 1.0)
