"""Pursuit (predator-prey) with a punishment for lone catch attempts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument
from .base import MOVE_NAMES, MOVES, MultiAgentEnv, StepResult, distinct_cells

N_MOVES = len(MOVES)


@dataclass(frozen=True)
class PursuitConfig:
    height: int = 10
    width: int = 10
    n_agents: int = 10
    n_prey: int = 5
    horizon: int = 50
    sight_radius: int = 2
    capture_reward: float = 1.0
    punishment: float = 1.0
    observe_position: bool = True
    observe_predators: bool = True
    # "window": exact offset inside the sight window; "direction": adjacent or compass octant only
    offset_mode: str = "window"

    def __post_init__(self):
        if self.n_agents < 2 or self.n_prey < 1:
            raise InvalidArgument("pursuit needs >= 2 predators and >= 1 prey")
        if self.n_agents + self.n_prey > self.height * self.width:
            raise InvalidArgument("grid too small for all entities")
        if self.sight_radius < 1:
            raise InvalidArgument("sight_radius must be >= 1 (catching needs adjacency)")
        if self.horizon < 1:
            raise InvalidArgument("horizon must be >= 1")
        if self.offset_mode not in ("window", "direction"):
            raise InvalidArgument(f"unknown offset_mode {self.offset_mode!r}")

    @property
    def n_offset_codes(self) -> int:
        """Codes per observed entity, the last one meaning 'not visible'."""
        if self.offset_mode == "direction":
            return 10
        w = 2 * self.sight_radius + 1
        return w * w + 1


@dataclass
class PursuitState:
    cfg: PursuitConfig
    pred: np.ndarray
    pred_alive: np.ndarray
    prey: np.ndarray
    prey_alive: np.ndarray

    def offset_code(self, src, dst) -> int:
        """Index of ``dst - src`` inside the sight window, or the 'absent' code."""
        cfg = self.cfg
        r = cfg.sight_radius
        d = dst - src
        if abs(d[0]) > r or abs(d[1]) > r:
            return cfg.n_offset_codes - 1
        if cfg.offset_mode == "direction":
            if abs(d[0]) <= 1 and abs(d[1]) <= 1:
                return 0
            # octant index 0..8 skipping the centre, which cannot occur here
            o = (int(np.sign(d[0])) + 1) * 3 + int(np.sign(d[1])) + 1
            return 1 + (o if o < 4 else o - 1)
        w = 2 * r + 1
        return int((d[0] + r) * w + (d[1] + r))

    def observe(self, i: int) -> tuple[int, ...]:
        cfg = self.cfg
        absent = cfg.n_offset_codes - 1
        if not self.pred_alive[i]:
            head = cfg.height * cfg.width if cfg.observe_position else 1
            rest = [absent] * (cfg.n_prey + (cfg.n_agents - 1 if cfg.observe_predators else 0))
            return (head, *rest)
        me = self.pred[i]
        head = int(me[0] * cfg.width + me[1]) if cfg.observe_position else 0
        out = [head]
        for k in range(cfg.n_prey):
            out.append(self.offset_code(me, self.prey[k]) if self.prey_alive[k] else absent)
        if cfg.observe_predators:
            for j in range(cfg.n_agents):
                if j != i:
                    out.append(self.offset_code(me, self.pred[j]) if self.pred_alive[j] else absent)
        return tuple(out)


def _chebyshev(a, b) -> int:
    return int(max(abs(a[0] - b[0]), abs(a[1] - b[1])))


def pursuit_step(state: PursuitState, a: np.ndarray, rng: np.random.Generator) -> StepResult:
    """Resolve catches, then predator moves, then one random-walk step per prey.

    Action ``5 + k`` tries to catch prey ``k``. It counts only if the prey is
    alive, within sight and within the Moore-1 neighbourhood; otherwise it is a
    ``stay`` (and an invisible target is counted in ``info["invalid_catches"]``).
    A prey with two or more catchers is captured by the two lowest-index ones,
    which leave the map with it; a lone catcher costs ``punishment``.
    """
    cfg = state.cfg
    a = np.asarray(a)
    if a.shape != (cfg.n_agents,) or (a < 0).any() or (a >= N_MOVES + cfg.n_prey).any():
        raise InvalidArgument(f"invalid pursuit actions {a!r}")
    catchers: list[list[int]] = [[] for _ in range(cfg.n_prey)]
    invalid = 0
    for i in range(cfg.n_agents):
        if not state.pred_alive[i] or a[i] < N_MOVES:
            continue
        k = int(a[i]) - N_MOVES
        if not state.prey_alive[k] or _chebyshev(state.pred[i], state.prey[k]) > cfg.sight_radius:
            invalid += 1
            continue
        if _chebyshev(state.pred[i], state.prey[k]) <= 1:
            catchers[k].append(i)

    reward = 0.0
    captured = 0
    lone = 0
    for k in range(cfg.n_prey):
        c = catchers[k]
        if len(c) >= 2:
            reward += cfg.capture_reward
            captured += 1
            state.prey_alive[k] = False
            state.pred_alive[c[0]] = False
            state.pred_alive[c[1]] = False
        elif len(c) == 1:
            reward -= cfg.punishment
            lone += 1

    prey_cells = {tuple(state.prey[k]) for k in range(cfg.n_prey) if state.prey_alive[k]}
    for i in range(cfg.n_agents):
        if not state.pred_alive[i] or a[i] >= N_MOVES or a[i] == 0:
            continue
        nxt = state.pred[i] + MOVES[a[i]]
        if 0 <= nxt[0] < cfg.height and 0 <= nxt[1] < cfg.width and tuple(nxt) not in prey_cells:
            state.pred[i] = nxt

    occupied = {tuple(state.pred[i]) for i in range(cfg.n_agents) if state.pred_alive[i]}
    occupied |= prey_cells
    for k in range(cfg.n_prey):
        if not state.prey_alive[k]:
            continue
        nxt = state.prey[k] + MOVES[rng.integers(N_MOVES)]
        if 0 <= nxt[0] < cfg.height and 0 <= nxt[1] < cfg.width and tuple(nxt) not in occupied:
            occupied.discard(tuple(state.prey[k]))
            state.prey[k] = nxt
            occupied.add(tuple(nxt))

    obs = [state.observe(i) for i in range(cfg.n_agents)]
    info = {"prey_captured": float(captured), "lone_catches": float(lone), "invalid_catches": float(invalid)}
    return StepResult(obs, reward, not state.prey_alive.any(), info)


class PursuitEnv(MultiAgentEnv):
    name = "pursuit"

    def __init__(self, cfg: PursuitConfig | None = None):
        super().__init__()
        self.cfg = cfg or PursuitConfig()
        c = self.cfg
        self.n_agents = c.n_agents
        self.n_actions = N_MOVES + c.n_prey
        self.horizon = c.horizon
        self.action_names = MOVE_NAMES + tuple(f"catch{k}" for k in range(c.n_prey))
        head = c.height * c.width + 1 if c.observe_position else 2
        n_rel = c.n_prey + (c.n_agents - 1 if c.observe_predators else 0)
        self.obs_dims = (head,) + (c.n_offset_codes,) * n_rel
        self.state: PursuitState | None = None

    def _reset(self):
        c = self.cfg
        cells = distinct_cells(self.rng, c.height, c.width, c.n_agents + c.n_prey)
        self.state = PursuitState(
            c,
            cells[: c.n_agents].copy(),
            np.ones(c.n_agents, dtype=bool),
            cells[c.n_agents:].copy(),
            np.ones(c.n_prey, dtype=bool),
        )

    def _step(self, a):
        return pursuit_step(self.state, a, self.rng)

    def _observe(self, i):
        return self.state.observe(i)

    def reward_bounds(self):
        c = self.cfg
        return -c.punishment * c.n_agents, c.capture_reward * (c.n_agents // 2)

    def render(self):
        c = self.cfg
        grid = [["." for _ in range(c.width)] for _ in range(c.height)]
        for k in range(c.n_prey):
            if self.state.prey_alive[k]:
                r, q = self.state.prey[k]
                grid[r][q] = "p"
        for i in range(c.n_agents):
            if self.state.pred_alive[i]:
                r, q = self.state.pred[i]
                grid[r][q] = "P" if grid[r][q] == "." else "*"
        return "\n".join("".join(row) for row in grid)
