"""Sensor network: fixed sensors cooperatively scan wandering targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument
from .base import MOVES, MultiAgentEnv, StepResult, distinct_cells

NOOP = 0
SCAN_OFFSETS = np.array([[-1, -1], [-1, 0], [-1, 1], [0, -1], [0, 1], [1, -1], [1, 0], [1, 1]], dtype=np.int64)


@dataclass(frozen=True)
class SensorConfig:
    rows: int = 3
    cols: int = 5
    n_targets: int = 3
    horizon: int = 20
    scan_cost: float = 1.0
    reward_per_scanner: float = 1.5
    min_scanners: int = 2

    def __post_init__(self):
        if self.rows * self.cols < 2:
            raise InvalidArgument("sensor grid needs at least two sensors")
        if not 1 <= self.n_targets <= self.rows * self.cols:
            raise InvalidArgument("n_targets must fit on the grid")
        if self.horizon < 1 or self.min_scanners < 1:
            raise InvalidArgument("horizon and min_scanners must be >= 1")

    @property
    def n_agents(self) -> int:
        return self.rows * self.cols


@dataclass
class SensorState:
    cfg: SensorConfig
    targets: np.ndarray

    def observe(self, i: int) -> tuple[int, ...]:
        r, c = divmod(i, self.cfg.cols)
        out = []
        for k in range(self.cfg.n_targets):
            d = self.targets[k] - (r, c)
            hit = np.flatnonzero((SCAN_OFFSETS == d).all(axis=1))
            out.append(int(hit[0]) if len(hit) else len(SCAN_OFFSETS))
        return tuple(out)


def sensor_step(state: SensorState, a: np.ndarray, rng: np.random.Generator) -> StepResult:
    """Score this step's scans, then move the targets.

    Every scan costs ``scan_cost``. A target whose cell is scanned by ``k >=
    min_scanners`` distinct sensors pays ``reward_per_scanner * k``. Targets
    random-walk (stay or one of 4 moves), blocked by the border and each other.
    """
    cfg = state.cfg
    a = np.asarray(a)
    if a.shape != (cfg.n_agents,) or (a < 0).any() or (a > len(SCAN_OFFSETS)).any():
        raise InvalidArgument(f"invalid sensor actions {a!r}")
    scanned_cells: dict[tuple[int, int], int] = {}
    n_scans = 0
    for i in range(cfg.n_agents):
        if a[i] == NOOP:
            continue
        n_scans += 1
        r, c = divmod(i, cfg.cols)
        cell = (r + int(SCAN_OFFSETS[a[i] - 1][0]), c + int(SCAN_OFFSETS[a[i] - 1][1]))
        scanned_cells[cell] = scanned_cells.get(cell, 0) + 1
    reward = -cfg.scan_cost * n_scans
    hits = 0
    for k in range(cfg.n_targets):
        n_k = scanned_cells.get((int(state.targets[k][0]), int(state.targets[k][1])), 0)
        if n_k >= cfg.min_scanners:
            reward += cfg.reward_per_scanner * n_k
            hits += 1

    occupied = {tuple(t) for t in state.targets}
    for k in range(cfg.n_targets):
        nxt = state.targets[k] + MOVES[rng.integers(len(MOVES))]
        if 0 <= nxt[0] < cfg.rows and 0 <= nxt[1] < cfg.cols and tuple(nxt) not in occupied:
            occupied.discard(tuple(state.targets[k]))
            state.targets[k] = nxt
            occupied.add(tuple(nxt))
    obs = [state.observe(i) for i in range(cfg.n_agents)]
    return StepResult(obs, reward, False, {"targets_scanned": float(hits), "scans": float(n_scans)})


class SensorEnv(MultiAgentEnv):
    name = "sensor"
    action_names = ("noop",) + tuple(f"scan{d}" for d in range(len(SCAN_OFFSETS)))

    def __init__(self, cfg: SensorConfig | None = None):
        super().__init__()
        self.cfg = cfg or SensorConfig()
        self.n_agents = self.cfg.n_agents
        self.n_actions = 1 + len(SCAN_OFFSETS)
        self.horizon = self.cfg.horizon
        self.obs_dims = (len(SCAN_OFFSETS) + 1,) * self.cfg.n_targets
        self.state: SensorState | None = None

    def _reset(self):
        c = self.cfg
        self.state = SensorState(c, distinct_cells(self.rng, c.rows, c.cols, c.n_targets))

    def _step(self, a):
        return sensor_step(self.state, a, self.rng)

    def _observe(self, i):
        return self.state.observe(i)

    def reward_bounds(self):
        c = self.cfg
        n = c.n_agents
        return -c.scan_cost * n, max(0.0, c.reward_per_scanner - c.scan_cost) * n

    def render(self):
        c = self.cfg
        grid = [["s" for _ in range(c.cols)] for _ in range(c.rows)]
        for k, (r, q) in enumerate(self.state.targets):
            grid[r][q] = str(k)
        return "\n".join("".join(row) for row in grid)
