"""Multi-group Hallway: each agent walks its own chain; groups must reach the goal together."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument
from .base import MultiAgentEnv, StepResult

LEFT, RIGHT, STAY = 0, 1, 2


@dataclass(frozen=True)
class HallwayConfig:
    group_sizes: tuple[int, ...] = (3, 3, 3, 3)
    # one length per agent; None draws each from [min_length, max_length] with layout_seed
    chain_lengths: tuple[int, ...] | None = None
    min_length: int = 4
    max_length: int = 8
    layout_seed: int = 0
    win_reward: float = 1.0
    clash_penalty: float = 0.5
    # None means max chain length + 10
    horizon: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "group_sizes", tuple(int(g) for g in self.group_sizes))
        if not self.group_sizes or min(self.group_sizes) < 1:
            raise InvalidArgument("every hallway group needs at least one agent")
        if self.chain_lengths is None:
            if not 1 <= self.min_length <= self.max_length:
                raise InvalidArgument("need 1 <= min_length <= max_length")
            rng = np.random.default_rng(self.layout_seed)
            lengths = rng.integers(self.min_length, self.max_length + 1, size=self.n_agents)
            object.__setattr__(self, "chain_lengths", tuple(int(x) for x in lengths))
        else:
            object.__setattr__(self, "chain_lengths", tuple(int(x) for x in self.chain_lengths))
        if len(self.chain_lengths) != self.n_agents or min(self.chain_lengths) < 1:
            raise InvalidArgument("need one chain length >= 1 per agent")
        if self.horizon is None:
            object.__setattr__(self, "horizon", max(self.chain_lengths) + 10)
        if self.horizon < 1:
            raise InvalidArgument("horizon must be >= 1")

    @property
    def n_agents(self) -> int:
        return sum(self.group_sizes)

    @property
    def groups(self) -> list[list[int]]:
        out, start = [], 0
        for g in self.group_sizes:
            out.append(list(range(start, start + g)))
            start += g
        return out


@dataclass
class HallwayState:
    cfg: HallwayConfig
    pos: np.ndarray
    group_alive: np.ndarray

    def observe(self, i: int) -> tuple[int, ...]:
        g = self.cfg.groups
        gi = next(k for k, members in enumerate(g) if i in members)
        if not self.group_alive[gi]:
            return (max(self.cfg.chain_lengths) + 1,)
        return (int(self.pos[i]),)


def hallway_step(state: HallwayState, a: np.ndarray, rng: np.random.Generator) -> StepResult:
    """Move along the chains (goal at position 0) and resolve arrivals.

    A group whose members all land on the goal in the same step wins and
    leaves. If several groups would do so at once, none of them moves and the
    team pays ``clash_penalty`` per such group. A group where only some members
    land on the goal is removed with no reward.
    """
    cfg = state.cfg
    a = np.asarray(a)
    if a.shape != (cfg.n_agents,) or (a < 0).any() or (a > STAY).any():
        raise InvalidArgument(f"invalid hallway actions {a!r}")
    lengths = np.asarray(cfg.chain_lengths)
    new = state.pos - (a == LEFT) + (a == RIGHT)
    new = np.clip(new, 0, lengths)

    full, partial = [], []
    for k, members in enumerate(cfg.groups):
        if not state.group_alive[k]:
            continue
        at_goal = new[members] == 0
        if at_goal.all():
            full.append(k)
        elif at_goal.any():
            partial.append(k)

    reward = 0.0
    won = clashes = 0
    if len(full) > 1:
        for k in full:
            new[cfg.groups[k]] = state.pos[cfg.groups[k]]
        reward -= cfg.clash_penalty * len(full)
        clashes = len(full)
    elif len(full) == 1:
        reward += cfg.win_reward
        state.group_alive[full[0]] = False
        won = 1
    for k in partial:
        state.group_alive[k] = False

    for k, members in enumerate(cfg.groups):
        if state.group_alive[k]:
            state.pos[members] = new[members]
    obs = [state.observe(i) for i in range(cfg.n_agents)]
    info = {"groups_won": float(won), "clashing_groups": float(clashes), "groups_failed": float(len(partial))}
    return StepResult(obs, reward, not state.group_alive.any(), info)


class HallwayEnv(MultiAgentEnv):
    name = "hallway"
    action_names = ("left", "right", "stay")

    def __init__(self, cfg: HallwayConfig | None = None):
        super().__init__()
        self.cfg = cfg or HallwayConfig()
        self.n_agents = self.cfg.n_agents
        self.n_actions = 3
        self.horizon = int(self.cfg.horizon)
        self.obs_dims = (max(self.cfg.chain_lengths) + 2,)
        self.state: HallwayState | None = None

    def _reset(self):
        lengths = np.asarray(self.cfg.chain_lengths)
        pos = np.array([self.rng.integers(1, l + 1) for l in lengths], dtype=np.int64)
        self.state = HallwayState(self.cfg, pos, np.ones(len(self.cfg.group_sizes), dtype=bool))

    def _step(self, a):
        return hallway_step(self.state, a, self.rng)

    def _observe(self, i):
        return self.state.observe(i)

    def reward_bounds(self):
        return -self.cfg.clash_penalty * len(self.cfg.group_sizes), self.cfg.win_reward

    def render(self):
        lines = []
        for i, l in enumerate(self.cfg.chain_lengths):
            cells = ["g"] + ["."] * l
            cells[int(self.state.pos[i])] = "A"
            lines.append("".join(cells))
        return "\n".join(lines)
