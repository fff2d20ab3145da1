"""Gather: a temporally extended climb game over three goal cells."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument
from .base import MOVE_NAMES, MOVES, MultiAgentEnv, StepResult, distinct_cells


@dataclass(frozen=True)
class GatherConfig:
    height: int = 8
    width: int = 8
    n_agents: int = 5
    horizon: int = 20
    knowledge_radius: int = 2
    # None places the goals at the top-left, top-right and bottom-right corners
    goals: tuple[tuple[int, int], ...] | None = None
    optimal_reward: float = 10.0
    suboptimal_reward: float = 5.0
    partial_penalty: float = 5.0

    def __post_init__(self):
        if self.goals is None:
            object.__setattr__(self, "goals", ((0, 0), (0, self.width - 1), (self.height - 1, self.width - 1)))
        else:
            object.__setattr__(self, "goals", tuple((int(r), int(c)) for r, c in self.goals))
        if len(set(self.goals)) != len(self.goals) or len(self.goals) < 2:
            raise InvalidArgument("gather needs at least two distinct goal cells")
        for r, c in self.goals:
            if not (0 <= r < self.height and 0 <= c < self.width):
                raise InvalidArgument(f"goal {(r, c)} lies outside the grid")
        if self.n_agents < 1 or self.horizon < 1 or self.knowledge_radius < 0:
            raise InvalidArgument("invalid gather sizes")
        if self.n_agents > self.height * self.width - len(self.goals):
            raise InvalidArgument("grid too small for the agents")


@dataclass
class GatherState:
    cfg: GatherConfig
    pos: np.ndarray
    optimal: int
    knows: np.ndarray
    t: int = 0

    def observe(self, i: int) -> tuple[int, ...]:
        cell = int(self.pos[i][0] * self.cfg.width + self.pos[i][1])
        return (cell, self.optimal if self.knows[i] else len(self.cfg.goals))


def gather_outcome(cfg: GatherConfig, on_goal: np.ndarray, optimal: int) -> float:
    """Reward when the episode is evaluated; ``on_goal[i]`` is a goal index or -1."""
    n_opt = int((on_goal == optimal).sum())
    if n_opt == len(on_goal):
        return cfg.optimal_reward
    if n_opt > 0:
        return -cfg.partial_penalty
    if (on_goal >= 0).all() and len(set(on_goal.tolist())) == 1:
        return cfg.suboptimal_reward
    return 0.0


def gather_step(state: GatherState, a: np.ndarray, rng: np.random.Generator) -> StepResult:
    """Move, then evaluate once everyone stands on a goal cell or the horizon is reached."""
    cfg = state.cfg
    a = np.asarray(a)
    if a.shape != (cfg.n_agents,) or (a < 0).any() or (a >= len(MOVES)).any():
        raise InvalidArgument(f"invalid gather actions {a!r}")
    nxt = state.pos + MOVES[a]
    ok = (nxt[:, 0] >= 0) & (nxt[:, 0] < cfg.height) & (nxt[:, 1] >= 0) & (nxt[:, 1] < cfg.width)
    state.pos[ok] = nxt[ok]
    state.t += 1
    goal_index = {g: k for k, g in enumerate(cfg.goals)}
    on_goal = np.array([goal_index.get((int(r), int(c)), -1) for r, c in state.pos])
    evaluate = (on_goal >= 0).all() or state.t >= cfg.horizon
    reward = gather_outcome(cfg, on_goal, state.optimal) if evaluate else 0.0
    info = {"success": float(evaluate and reward == cfg.optimal_reward)}
    obs = [state.observe(i) for i in range(cfg.n_agents)]
    return StepResult(obs, reward, evaluate, info)


class GatherEnv(MultiAgentEnv):
    name = "gather"
    action_names = MOVE_NAMES

    def __init__(self, cfg: GatherConfig | None = None):
        super().__init__()
        self.cfg = cfg or GatherConfig()
        self.n_agents = self.cfg.n_agents
        self.n_actions = len(MOVES)
        self.horizon = self.cfg.horizon
        self.obs_dims = (self.cfg.height * self.cfg.width, len(self.cfg.goals) + 1)
        self.state: GatherState | None = None

    def _reset(self):
        c = self.cfg
        optimal = int(self.rng.integers(len(c.goals)))
        goal_cells = [r * c.width + q for r, q in c.goals]
        pos = distinct_cells(self.rng, c.height, c.width, c.n_agents, exclude=goal_cells)
        g = np.asarray(c.goals[optimal])
        knows = np.abs(pos - g).max(axis=1) <= c.knowledge_radius
        self.state = GatherState(c, pos, optimal, knows)

    def _step(self, a):
        return gather_step(self.state, a, self.rng)

    def _observe(self, i):
        return self.state.observe(i)

    def reward_bounds(self):
        c = self.cfg
        return -c.partial_penalty, c.optimal_reward

    def render(self):
        c = self.cfg
        grid = [["." for _ in range(c.width)] for _ in range(c.height)]
        for k, (r, q) in enumerate(c.goals):
            grid[r][q] = "G" if k == self.state.optimal else "g"
        for r, q in self.state.pos:
            grid[r][q] = "A"
        return "\n".join("".join(row) for row in grid)
