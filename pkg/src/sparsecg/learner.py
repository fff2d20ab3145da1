"""Tabular sparse-coordination-graph learner: epsilon-greedy Max-Sum acting, episode replay,
semi-gradient TD on the coordination-graph value plus the sparseness penalty."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InvalidArgument, NumericFailure
from .graph import pair_index
from .maxsum import DEFAULT_ITERATIONS, JointAction
from .metrics import wire_messages
from .sparsify import TopologyCriterion, random_mask
from .values import SPARSE_VARIANTS, ObsKey, ValueTables

_LOSS_CODE = {
    "qvar": kernels.LOSS_QVAR,
    "abs_delta": kernels.LOSS_ABS_DELTA,
    "delta_var": kernels.LOSS_DELTA_VAR,
}


@dataclass(frozen=True)
class Transition:
    keys: tuple[ObsKey, ...]
    joint_action: JointAction
    reward: float
    next_keys: tuple[ObsKey, ...]
    terminal: bool

    def __post_init__(self):
        if not math.isfinite(self.reward):
            raise InvalidArgument("transition reward must be finite")
        if not (len(self.keys) == len(self.joint_action) == len(self.next_keys)):
            raise InvalidArgument("keys, actions and next keys must cover the same agents")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-4
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_anneal_steps: int = 50_000
    batch_episodes: int = 32
    target_sync_interval: int = 2000
    lambda_sparse: float = 1e-4
    maxsum_iterations: int = DEFAULT_ITERATIONS
    criterion: TopologyCriterion = field(default_factory=TopologyCriterion)
    total_steps: int = 100_000
    eval_interval: int = 10_000
    eval_episodes: int = 32
    replay_capacity: int = 5000
    seed: int = 0
    # number of past observations forming an agent's key
    history: int = 1
    # evaluate Q_tot over every ordered pair instead of the active edges
    qtot_all_pairs: bool = False
    sparse_variant: str = "qvar"
    normalize_messages: bool = True

    def __post_init__(self):
        if not self.lr > 0:
            raise InvalidArgument("lr must be > 0")
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidArgument("gamma must lie in [0, 1)")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise InvalidArgument("need 0 <= epsilon_end <= epsilon_start <= 1")
        for name in ("epsilon_anneal_steps", "batch_episodes", "target_sync_interval", "maxsum_iterations",
                     "eval_interval", "eval_episodes", "replay_capacity", "history"):
            if getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be >= 1")
        if self.total_steps < 0 or self.lambda_sparse < 0:
            raise InvalidArgument("total_steps and lambda_sparse must be >= 0")
        if self.sparse_variant not in SPARSE_VARIANTS:
            raise InvalidArgument(f"unknown sparse variant {self.sparse_variant!r}")
        if self.criterion.order != "descending":
            raise InvalidArgument("training always keeps the highest-scoring edges")

    def epsilon(self, step: int) -> float:
        if step >= self.epsilon_anneal_steps:
            return self.epsilon_end
        frac = step / self.epsilon_anneal_steps
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


@dataclass
class LossReport:
    td_loss: float
    sparse_loss: float


@dataclass
class EvalResult:
    returns: np.ndarray
    edges_used_mean: float
    messages_per_selection: float
    aux: dict[str, float]
    # per-episode totals of every info entry
    aux_episodes: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class LearningCurve:
    points: list[dict[str, float]] = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def add(self, point: dict[str, float]) -> None:
        if self.points and point["env_steps"] <= self.points[-1]["env_steps"]:
            raise InvalidArgument("curve env_steps must be strictly increasing")
        self.points.append(point)

    def column(self, name: str) -> np.ndarray:
        return np.array([p.get(name, np.nan) for p in self.points], dtype=float)

    def columns(self) -> list[str]:
        base = ["env_steps", "eval_return_mean", "eval_return_median", "eval_return_p25",
                "eval_return_p75", "edges_used_mean", "messages_per_selection"]
        aux = sorted({k for p in self.points for k in p if k not in base})
        return base + aux


@dataclass
class Episode:
    """One stored episode as row indices into the online tables."""

    rows: np.ndarray
    prows: np.ndarray
    acts: np.ndarray
    rew: np.ndarray
    term: np.ndarray
    nrows: np.ndarray
    nprows: np.ndarray
    # bootstrap targets and active edges, valid while the target tables are at ``version``
    y: np.ndarray | None = field(default=None, repr=False)
    mcs: np.ndarray | None = field(default=None, repr=False)
    version: int = -1

    def __len__(self):
        return len(self.rew)


class ReplayBuffer:
    """FIFO store of whole episodes; sampling is uniform without replacement."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise InvalidArgument("replay capacity must be >= 1")
        self.capacity = int(capacity)
        self._eps: deque[Episode] = deque(maxlen=self.capacity)

    def __len__(self):
        return len(self._eps)

    def add(self, ep: Episode) -> None:
        self._eps.append(ep)

    def sample(self, k: int, rng: np.random.Generator) -> list[Episode]:
        if not self._eps:
            raise InvalidArgument("cannot sample from an empty replay buffer")
        idx = rng.choice(len(self._eps), size=min(k, len(self._eps)), replace=False)
        return [self._eps[i] for i in idx]


def _stack(eps: Sequence[Episode]) -> Episode:
    return Episode(*(np.concatenate([getattr(e, f) for e in eps]) for f in
                     ("rows", "prows", "acts", "rew", "term", "nrows", "nprows")))


def _pair_rows(tables: ValueTables, rows: np.ndarray, pi, pj, allocate: bool) -> np.ndarray:
    out = np.full(len(pi), -1, dtype=np.int64)
    for p in range(len(pi)):
        a, b = rows[pi[p]], rows[pj[p]]
        if a >= 0 and b >= 0:
            out[p] = tables.pair_row_from_rows(int(a), int(b), allocate)
    return out


def _key_rows(tables: ValueTables, keys: Sequence[ObsKey], allocate: bool) -> np.ndarray:
    return np.array([tables.row(k, allocate) for k in keys], dtype=np.int64)


def _masks(crit: TopologyCriterion, n: int, count: int, rng: np.random.Generator | None) -> np.ndarray:
    """Per-selection input masks for mask-driven criteria (unused by score-based ones)."""
    n_pairs = n * (n - 1) // 2
    if crit.kind == "full":
        return np.ones((count, n_pairs), dtype=np.bool_)
    if crit.kind == "random":
        if rng is None:
            rng = np.random.default_rng(crit.rng_seed)
        b = crit.budget(n)
        return np.stack([random_mask(n_pairs, b, rng) for _ in range(count)]).reshape(count, n_pairs)
    return np.zeros((count, n_pairs), dtype=np.bool_)


def _kind(crit: TopologyCriterion) -> int:
    return crit.score_kind


def _greedy(tables, target, rows, prows, pi, pj, crit, mask, iters, normalize, descending=True, all_pairs=False):
    a, n_e, status = kernels.act(
        tables.u, tables.p, target.u, target.p, rows, prows, pi, pj,
        _kind(crit), crit.budget(len(rows)), descending, mask, iters, normalize, all_pairs,
    )
    if status != kernels.STATUS_OK:
        raise NumericFailure("Max-Sum produced non-finite messages")
    return a, int(n_e)


def act(
    tables: ValueTables,
    target: ValueTables,
    keys: Sequence[ObsKey],
    crit: TopologyCriterion,
    epsilon: float,
    rng: np.random.Generator,
    iterations: int = DEFAULT_ITERATIONS,
    graph_rng: np.random.Generator | None = None,
    all_pairs: bool = False,
) -> JointAction:
    """Epsilon-greedy joint action.

    The topology is built from ``target``; anytime Max-Sum then runs on
    ``tables``. Each agent independently swaps its greedy action for a uniform
    one with probability ``epsilon``.
    """
    if tables.n_actions != target.n_actions:
        raise InvalidArgument("online and target tables disagree on the action count")
    n = len(keys)
    pi, pj = pair_index(n)
    rows = _key_rows(tables, keys, False)
    prows = _pair_rows(tables, rows, pi, pj, False)
    mask = _masks(crit, n, 1, graph_rng)[0]
    a, _ = _greedy(tables, target, rows, prows, pi, pj, crit, mask, iterations, True,
                   crit.order == "descending", all_pairs)
    return tuple(int(x) for x in _explore(a, epsilon, tables.n_actions, rng))


def _explore(a: np.ndarray, epsilon: float, n_actions: int, rng: np.random.Generator) -> np.ndarray:
    # both draws happen every step so the stream does not depend on epsilon
    u = rng.random(len(a))
    r = rng.integers(n_actions, size=len(a))
    return np.where(u < epsilon, r, a).astype(np.int64)


def _targets(target, ep: Episode, crit, cfg: TrainConfig, graph_rng):
    n = ep.rows.shape[1]
    pi, pj = pair_index(n)
    T = len(ep)
    mc = _masks(crit, n, T, graph_rng)
    mn = _masks(crit, n, T, graph_rng)
    return kernels.td_targets(
        target.u, target.p, ep.rows, ep.prows, ep.rew, ep.term, ep.nrows, ep.nprows, pi, pj,
        _kind(crit), crit.budget(n), mc, mn, cfg.maxsum_iterations, cfg.normalize_messages,
        cfg.qtot_all_pairs, cfg.gamma,
    )


def _td_arrays(tables, target, ep: Episode, crit, cfg: TrainConfig, graph_rng, y=None, mcs=None):
    if y is None:
        y, mcs = _targets(target, ep, crit, cfg, graph_rng)
    pi, pj = pair_index(ep.rows.shape[1])
    td, sp = kernels.td_batch(
        tables.u, tables.p, ep.rows, ep.prows, ep.acts, y, mcs, pi, pj,
        cfg.lr, cfg.lambda_sparse, _LOSS_CODE[cfg.sparse_variant],
    )
    return LossReport(float(td), float(sp))


def td_update(
    tables: ValueTables,
    target: ValueTables,
    batch: Sequence[Transition],
    cfg: TrainConfig,
    graph_rng: np.random.Generator | None = None,
) -> LossReport:
    """Sequential semi-gradient TD steps over ``batch``, then one sparseness step.

    Targets come from ``target`` (topology and Max-Sum alike); terminal
    transitions use ``y = r``. Rows for every key in the batch are allocated
    in ``tables`` first.
    """
    if not batch:
        raise InvalidArgument("td_update needs a non-empty batch")
    n = len(batch[0].keys)
    pi, pj = pair_index(n)
    cols = {k: [] for k in ("rows", "prows", "acts", "rew", "term", "nrows", "nprows")}
    for tr in batch:
        rows = _key_rows(tables, tr.keys, True)
        nrows = _key_rows(tables, tr.next_keys, True)
        cols["rows"].append(rows)
        cols["prows"].append(_pair_rows(tables, rows, pi, pj, True))
        cols["nrows"].append(nrows)
        cols["nprows"].append(_pair_rows(tables, nrows, pi, pj, True))
        cols["acts"].append(np.asarray(tr.joint_action, dtype=np.int64))
        cols["rew"].append(float(tr.reward))
        cols["term"].append(bool(tr.terminal))
    ep = Episode(
        np.stack(cols["rows"]), np.stack(cols["prows"]).reshape(len(batch), len(pi)),
        np.stack(cols["acts"]), np.asarray(cols["rew"], dtype=float), np.asarray(cols["term"], dtype=np.bool_),
        np.stack(cols["nrows"]), np.stack(cols["nprows"]).reshape(len(batch), len(pi)),
    )
    return _td_arrays(tables, target, ep, cfg.criterion, cfg, graph_rng)


def sync_target(tables: ValueTables, target: ValueTables | None = None) -> ValueTables:
    """Fresh read-only snapshot of ``tables``; the previous ``target`` is left untouched."""
    return tables.snapshot()


class KeyEncoder:
    """Maps an agent's last ``history`` observations to an :class:`ObsKey`."""

    def __init__(self, env, history: int = 1):
        self.env = env
        self.history = int(history)
        self.radix = env.obs_size + 1
        self._buf: list[deque] = []

    def reset(self, obs) -> tuple[ObsKey, ...]:
        pad = self.radix - 1
        self._buf = [deque([pad] * self.history, maxlen=self.history) for _ in obs]
        return self.push(obs)

    def push(self, obs) -> tuple[ObsKey, ...]:
        keys = []
        for i, o in enumerate(obs):
            buf = self._buf[i]
            buf.append(self.env.encode(o))
            if self.history == 1:
                keys.append(ObsKey(i, buf[0]))
            else:
                code = 0
                for c in buf:
                    code = code * self.radix + c
                keys.append(ObsKey(i, code))
        return tuple(keys)


def evaluate(
    env,
    tables: ValueTables,
    target: ValueTables,
    crit: TopologyCriterion,
    seeds: Sequence[int],
    iterations: int = DEFAULT_ITERATIONS,
    graph_seed: int = 0,
    history: int = 1,
    normalize: bool = True,
    all_pairs: bool = False,
) -> EvalResult:
    """Greedy (epsilon = 0) rollouts, one per seed; tables are only read."""
    n = env.n_agents
    pi, pj = pair_index(n)
    graph_rng = np.random.default_rng(graph_seed)
    enc = KeyEncoder(env, history)
    descending = crit.order == "descending"
    returns = np.zeros(len(seeds))
    edges, selections = 0, 0
    aux: dict[str, np.ndarray] = {}
    for e, s in enumerate(seeds):
        keys = enc.reset(env.reset(int(s)))
        while True:
            rows = _key_rows(tables, keys, False)
            prows = _pair_rows(tables, rows, pi, pj, False)
            mask = _masks(crit, n, 1, graph_rng)[0]
            a, n_e = _greedy(tables, target, rows, prows, pi, pj, crit, mask, iterations, normalize, descending,
                             all_pairs)
            edges += n_e
            selections += 1
            res = env.step(a)
            returns[e] += res.reward
            for k, v in res.info.items():
                if k != "timeout":
                    if k not in aux:
                        aux[k] = np.zeros(len(seeds))
                    aux[k][e] += float(v)
            if res.terminal:
                break
            keys = enc.push(res.observations)
    edges_mean = edges / selections if selections else 0.0
    return EvalResult(
        returns,
        edges_mean,
        wire_messages(n, edges_mean, iterations),
        {name: float(v.mean()) for name, v in sorted(aux.items())},
        dict(sorted(aux.items())),
    )


def curve_point(env_steps: int, res: EvalResult) -> dict[str, float]:
    r = res.returns
    point = {
        "env_steps": int(env_steps),
        "eval_return_mean": float(r.mean()) if len(r) else 0.0,
        "eval_return_median": float(np.median(r)) if len(r) else 0.0,
        "eval_return_p25": float(np.percentile(r, 25)) if len(r) else 0.0,
        "eval_return_p75": float(np.percentile(r, 75)) if len(r) else 0.0,
        "edges_used_mean": res.edges_used_mean,
        "messages_per_selection": res.messages_per_selection,
    }
    for k, v in res.aux.items():
        point[f"aux_{k}"] = v
    return point


class Trainer:
    """Single-seed training loop.

    Random streams are spawned from ``cfg.seed`` in a fixed order: episode
    seeds, exploration, replay sampling, random topologies, evaluation seeds.
    """

    def __init__(self, env, cfg: TrainConfig, tables: ValueTables | None = None):
        self.env = env
        self.cfg = cfg
        self.tables = tables if tables is not None else ValueTables(env.n_actions)
        self.target = self.tables.snapshot()
        ss = np.random.SeedSequence(cfg.seed).spawn(5)
        self.env_rng, self.explore_rng, self.replay_rng, self.graph_rng, eval_rng = (
            np.random.default_rng(s) for s in ss
        )
        self.eval_seeds = [int(x) for x in eval_rng.integers(2**31, size=cfg.eval_episodes)]
        self.replay = ReplayBuffer(cfg.replay_capacity)
        self.encoder = KeyEncoder(env, cfg.history)
        self.pi, self.pj = pair_index(env.n_agents)
        self.env_steps = 0
        self.episodes = 0
        self._last_sync = 0
        self._target_version = 0
        self.last_loss = LossReport(0.0, 0.0)
        self.curve = LearningCurve()

    def _rows(self, keys):
        rows = _key_rows(self.tables, keys, True)
        return rows, _pair_rows(self.tables, rows, self.pi, self.pj, True)

    def run_episode(self) -> Episode:
        env, cfg, crit = self.env, self.cfg, self.cfg.criterion
        n = env.n_agents
        keys = self.encoder.reset(env.reset(int(self.env_rng.integers(2**31))))
        rows, prows = self._rows(keys)
        buf = {k: [] for k in ("rows", "prows", "acts", "rew", "term", "nrows", "nprows")}
        while True:
            mask = _masks(crit, n, 1, self.graph_rng)[0]
            a, _ = _greedy(self.tables, self.target, rows, prows, self.pi, self.pj, crit, mask,
                           cfg.maxsum_iterations, cfg.normalize_messages, True, cfg.qtot_all_pairs)
            a = _explore(a, cfg.epsilon(self.env_steps), env.n_actions, self.explore_rng)
            res = env.step(a)
            self.env_steps += 1
            keys = self.encoder.push(res.observations)
            nrows, nprows = self._rows(keys)
            buf["rows"].append(rows)
            buf["prows"].append(prows)
            buf["acts"].append(a)
            buf["rew"].append(float(res.reward))
            # horizon cut-offs bootstrap; only true terminations end the return
            buf["term"].append(bool(res.terminal and not res.info.get("timeout", 0.0)))
            buf["nrows"].append(nrows)
            buf["nprows"].append(nprows)
            rows, prows = nrows, nprows
            if res.terminal:
                break
        T, n_pairs = len(buf["rew"]), len(self.pi)
        return Episode(
            np.stack(buf["rows"]), np.stack(buf["prows"]).reshape(T, n_pairs), np.stack(buf["acts"]),
            np.asarray(buf["rew"], dtype=float), np.asarray(buf["term"], dtype=np.bool_),
            np.stack(buf["nrows"]), np.stack(buf["nprows"]).reshape(T, n_pairs),
        )

    def update(self) -> LossReport:
        cfg, crit = self.cfg, self.cfg.criterion
        eps = self.replay.sample(cfg.batch_episodes, self.replay_rng)
        batch = _stack(eps)
        if crit.kind == "random":
            # fresh masks per update, so nothing is reusable
            self.last_loss = _td_arrays(self.tables, self.target, batch, crit, cfg, self.graph_rng)
            return self.last_loss
        for ep in eps:
            if ep.version != self._target_version:
                ep.y, ep.mcs = _targets(self.target, ep, crit, cfg, None)
                ep.version = self._target_version
        y = np.concatenate([ep.y for ep in eps])
        mcs = np.concatenate([ep.mcs for ep in eps])
        self.last_loss = _td_arrays(self.tables, self.target, batch, crit, cfg, None, y, mcs)
        return self.last_loss

    def evaluate(self) -> EvalResult:
        return evaluate(self.env, self.tables, self.target, self.cfg.criterion, self.eval_seeds,
                        self.cfg.maxsum_iterations, self.cfg.seed, self.cfg.history, self.cfg.normalize_messages,
                        self.cfg.qtot_all_pairs)

    def train(self) -> LearningCurve:
        cfg = self.cfg
        next_eval = cfg.eval_interval
        while self.env_steps < cfg.total_steps:
            self.replay.add(self.run_episode())
            self.episodes += 1
            self.update()
            if self.env_steps - self._last_sync >= cfg.target_sync_interval:
                self.target = sync_target(self.tables, self.target)
                self._target_version += 1
                self._last_sync = self.env_steps
            if self.env_steps >= next_eval:
                self.curve.add(curve_point(self.env_steps, self.evaluate()))
                while next_eval <= self.env_steps:
                    next_eval += cfg.eval_interval
        if self.env_steps > 0 and (not self.curve.points or self.curve.points[-1]["env_steps"] < self.env_steps):
            self.curve.add(curve_point(self.env_steps, self.evaluate()))
        return self.curve


def train(env, cfg: TrainConfig, tables: ValueTables | None = None) -> LearningCurve:
    return Trainer(env, cfg, tables).train()
