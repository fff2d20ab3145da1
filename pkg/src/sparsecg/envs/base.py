"""Shared environment interface."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InvalidArgument

Obs = tuple[int, ...]


@dataclass
class StepResult:
    observations: list[Obs]
    reward: float
    terminal: bool
    info: dict[str, float] = field(default_factory=dict)


class MultiAgentEnv:
    """Seeded Dec-POMDP simulator.

    Observations are small integer tuples whose components are bounded by
    ``obs_dims``; :meth:`encode` maps them injectively to
    ``[0, obs_size)``. Episodes end at ``horizon`` at the latest; when the
    horizon alone ends an episode ``info["timeout"]`` is 1.
    """

    name: str = ""
    n_agents: int
    n_actions: int
    horizon: int
    obs_dims: tuple[int, ...]
    action_names: tuple[str, ...] = ()

    def __init__(self):
        self.rng = np.random.default_rng(0)
        self.t = 0
        self.done = True

    @property
    def obs_size(self) -> int:
        return int(np.prod(self.obs_dims, dtype=np.int64))

    def encode(self, obs: Obs) -> int:
        if len(obs) != len(self.obs_dims):
            raise InvalidArgument(f"observation {obs} does not match dims {self.obs_dims}")
        code = 0
        for x, d in zip(obs, self.obs_dims):
            if not 0 <= x < d:
                raise InvalidArgument(f"observation component {x} outside [0, {d})")
            code = code * d + int(x)
        return code

    def decode(self, code: int) -> Obs:
        out = []
        for d in reversed(self.obs_dims):
            out.append(code % d)
            code //= d
        return tuple(reversed(out))

    def reset(self, seed: int | None = None) -> list[Obs]:
        self.rng = np.random.default_rng(seed)
        self.t = 0
        self.done = False
        self._reset()
        return self.observe()

    def step(self, actions: Sequence[int]) -> StepResult:
        if self.done:
            raise InvalidArgument("step() called on a finished episode; call reset()")
        a = self.check_actions(actions)
        res = self._step(a)
        self.t += 1
        timeout = self.t >= self.horizon and not res.terminal
        self.done = res.terminal or timeout
        res.info["timeout"] = float(timeout)
        res.terminal = self.done
        return res

    def check_actions(self, actions: Sequence[int]) -> np.ndarray:
        a = np.asarray(actions)
        if a.shape != (self.n_agents,) or not np.issubdtype(a.dtype, np.integer):
            raise InvalidArgument(f"expected {self.n_agents} integer actions, got {actions!r}")
        if (a < 0).any() or (a >= self.n_actions).any():
            raise InvalidArgument(f"actions must lie in [0, {self.n_actions}), got {actions!r}")
        return a.astype(np.int64)

    def observe(self) -> list[Obs]:
        return [self._observe(i) for i in range(self.n_agents)]

    def reward_bounds(self) -> tuple[float, float]:
        raise NotImplementedError

    def render(self) -> str:
        return f"{self.name} t={self.t}"

    def _reset(self) -> None:
        raise NotImplementedError

    def _step(self, a: np.ndarray) -> StepResult:
        raise NotImplementedError

    def _observe(self, i: int) -> Obs:
        raise NotImplementedError


MOVES = np.array([[0, 0], [-1, 0], [1, 0], [0, -1], [0, 1]], dtype=np.int64)
MOVE_NAMES = ("stay", "up", "down", "left", "right")


def in_grid(pos, height: int, width: int) -> bool:
    return 0 <= pos[0] < height and 0 <= pos[1] < width


def distinct_cells(rng: np.random.Generator, height: int, width: int, k: int, exclude=()) -> np.ndarray:
    cells = [c for c in range(height * width) if c not in set(exclude)]
    if k > len(cells):
        raise InvalidArgument(f"cannot place {k} entities on {len(cells)} free cells")
    pick = rng.choice(len(cells), size=k, replace=False)
    flat = np.asarray(cells, dtype=np.int64)[pick]
    return np.stack([flat // width, flat % width], axis=1)
