"""Aloha: radio islands on a grid sharing a channel with their 4-neighbours."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument
from .base import MultiAgentEnv, StepResult

IDLE, SEND = 0, 1


@dataclass(frozen=True)
class AlohaConfig:
    rows: int = 2
    cols: int = 5
    max_backlog: int = 5
    init_backlog: int = 1
    arrival_prob: float = 0.6
    success_reward: float = 0.1
    collision_penalty: float = 10.0
    horizon: int = 20

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.rows * self.cols < 2:
            raise InvalidArgument("aloha needs at least two islands")
        if not 0 <= self.init_backlog <= self.max_backlog:
            raise InvalidArgument("init_backlog must lie in [0, max_backlog]")
        if not 0.0 <= self.arrival_prob <= 1.0:
            raise InvalidArgument("arrival_prob must be a probability")
        if self.horizon < 1:
            raise InvalidArgument("horizon must be >= 1")

    @property
    def n_agents(self) -> int:
        return self.rows * self.cols


@dataclass
class AlohaState:
    cfg: AlohaConfig
    backlog: np.ndarray
    neighbors: list[np.ndarray]


def aloha_step(state: AlohaState, a: np.ndarray, rng: np.random.Generator) -> StepResult:
    """Advance one slot in place.

    A send collides iff a 4-neighbour sends in the same slot; every colliding
    sender is penalized and keeps its packet. Sending with an empty backlog is
    idle. Arrivals are drawn after transmissions.
    """
    cfg = state.cfg
    a = np.asarray(a)
    if a.shape != (cfg.n_agents,) or ((a != IDLE) & (a != SEND)).any():
        raise InvalidArgument(f"aloha actions must be 0 (idle) or 1 (send), got {a!r}")
    sends = (a == SEND) & (state.backlog > 0)
    collide = np.array([sends[i] and sends[state.neighbors[i]].any() for i in range(cfg.n_agents)])
    success = sends & ~collide
    state.backlog[success] -= 1
    arrive = (rng.random(cfg.n_agents) < cfg.arrival_prob) & (state.backlog < cfg.max_backlog)
    state.backlog[arrive] += 1
    reward = cfg.success_reward * int(success.sum()) - cfg.collision_penalty * int(collide.sum())
    info = {"successes": float(success.sum()), "collisions": float(collide.sum())}
    obs = [(i, int(state.backlog[i])) for i in range(cfg.n_agents)]
    return StepResult(obs, float(reward), False, info)


class AlohaEnv(MultiAgentEnv):
    name = "aloha"
    action_names = ("idle", "send")

    def __init__(self, cfg: AlohaConfig | None = None):
        super().__init__()
        self.cfg = cfg or AlohaConfig()
        self.n_agents = self.cfg.n_agents
        self.n_actions = 2
        self.horizon = self.cfg.horizon
        self.obs_dims = (self.n_agents, self.cfg.max_backlog + 1)
        rows, cols = self.cfg.rows, self.cfg.cols
        self._neighbors = []
        for i in range(self.n_agents):
            r, c = divmod(i, cols)
            nb = [rr * cols + cc for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1))
                  if 0 <= rr < rows and 0 <= cc < cols]
            self._neighbors.append(np.asarray(nb, dtype=np.int64))
        self.state: AlohaState | None = None

    def _reset(self):
        self.state = AlohaState(self.cfg, np.full(self.n_agents, self.cfg.init_backlog, dtype=np.int64), self._neighbors)

    def _step(self, a):
        return aloha_step(self.state, a, self.rng)

    def _observe(self, i):
        return (i, int(self.state.backlog[i]))

    def reward_bounds(self):
        n = self.n_agents
        return -self.cfg.collision_penalty * n, self.cfg.success_reward * n

    def render(self):
        b = self.state.backlog.reshape(self.cfg.rows, self.cfg.cols)
        return "\n".join(" ".join(str(x) for x in row) for row in b)
