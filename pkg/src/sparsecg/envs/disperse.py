"""Disperse: agents choose hospitals; the announced need must be met next step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument
from .base import MultiAgentEnv, StepResult


@dataclass(frozen=True)
class DisperseConfig:
    n_agents: int = 12
    n_hospitals: int = 4
    horizon: int = 20
    # need is uniform on [1, max_need]; None means n_agents
    max_need: int | None = None

    def __post_init__(self):
        if self.max_need is None:
            object.__setattr__(self, "max_need", self.n_agents)
        if self.n_agents < 1 or self.n_hospitals < 1 or self.horizon < 1 or self.max_need < 1:
            raise InvalidArgument("invalid disperse sizes")


@dataclass
class DisperseState:
    cfg: DisperseConfig
    loc: np.ndarray
    hospital: int
    need: int

    def observe(self, i: int) -> tuple[int, ...]:
        h = int(self.loc[i])
        return (h, self.need if h == self.hospital else 0)

    def announce(self, rng: np.random.Generator) -> None:
        self.hospital = int(rng.integers(self.cfg.n_hospitals))
        self.need = int(rng.integers(1, self.cfg.max_need + 1))


def disperse_step(state: DisperseState, a: np.ndarray, rng: np.random.Generator) -> StepResult:
    """Relocate agents, charge any shortfall at the announced hospital, announce the next need."""
    cfg = state.cfg
    a = np.asarray(a)
    if a.shape != (cfg.n_agents,) or (a < 0).any() or (a >= cfg.n_hospitals).any():
        raise InvalidArgument(f"invalid disperse actions {a!r}")
    state.loc[:] = a
    present = int((state.loc == state.hospital).sum())
    shortfall = max(0, state.need - present)
    reward = -float(shortfall)
    state.announce(rng)
    obs = [state.observe(i) for i in range(cfg.n_agents)]
    return StepResult(obs, reward, False, {"shortfall": float(shortfall)})


class DisperseEnv(MultiAgentEnv):
    name = "disperse"

    def __init__(self, cfg: DisperseConfig | None = None):
        super().__init__()
        self.cfg = cfg or DisperseConfig()
        self.n_agents = self.cfg.n_agents
        self.n_actions = self.cfg.n_hospitals
        self.horizon = self.cfg.horizon
        self.action_names = tuple(f"go{j}" for j in range(self.cfg.n_hospitals))
        self.obs_dims = (self.cfg.n_hospitals, self.cfg.max_need + 1)
        self.state: DisperseState | None = None

    def _reset(self):
        loc = self.rng.integers(self.cfg.n_hospitals, size=self.n_agents)
        self.state = DisperseState(self.cfg, loc, 0, 0)
        self.state.announce(self.rng)

    def _step(self, a):
        return disperse_step(self.state, a, self.rng)

    def _observe(self, i):
        return self.state.observe(i)

    def reward_bounds(self):
        return -float(self.cfg.max_need), 0.0

    def render(self):
        counts = np.bincount(self.state.loc, minlength=self.cfg.n_hospitals)
        return f"need {self.state.need} at {self.state.hospital}; staffed {counts.tolist()}"
