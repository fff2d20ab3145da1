"""Independent reference implementations used by the test-suite."""

from collections import deque

import numpy as np

from sparsecg.envs.base import MultiAgentEnv, StepResult


class PenaltyGame(MultiAgentEnv):
    """One-shot two-agent game: both pick 1 -> +1, exactly one picks 1 -> -1, else 0."""

    name = "penalty-game"
    n_agents = 2
    n_actions = 2
    horizon = 1
    obs_dims = (1,)

    def _reset(self):
        pass

    def _observe(self, i):
        return (0,)

    def _step(self, a):
        s = int(a.sum())
        r = 1.0 if s == 2 else (-1.0 if s == 1 else 0.0)
        return StepResult([(0,), (0,)], r, True, {})

    def reward_bounds(self):
        return -1.0, 1.0


class StepLog:
    """Env wrapper that records every joint action and reward."""

    def __init__(self, env):
        self._env = env
        self.log = []

    def __getattr__(self, name):
        return getattr(self._env, name)

    def step(self, actions):
        res = self._env.step(actions)
        self.log.append((tuple(int(x) for x in actions), float(res.reward)))
        return res


def plain_q_learner(env, cfg):
    """Shared-table independent Q-learning with the value ``mean_i Q_i(o_i, a_i)``.

    Written without the package's learner: per-agent dict tables, a list-based
    replay of transitions and a python loop for every update. Random streams
    follow the documented protocol (five spawned generators, epsilon draws on
    every step, uniform episode sampling without replacement).
    """
    n, A = env.n_agents, env.n_actions
    ss = np.random.SeedSequence(cfg.seed).spawn(5)
    env_rng, explore_rng, replay_rng, _graph_rng, eval_rng = (np.random.default_rng(s) for s in ss)
    eval_seeds = [int(x) for x in eval_rng.integers(2**31, size=cfg.eval_episodes)]
    Q = {}
    target = {}

    def get(table, i, o):
        return table.get((i, env.encode(o)), np.zeros(A))

    def greedy(obs):
        return np.array([int(np.argmax(get(Q, i, obs[i]))) for i in range(n)], dtype=np.int64)

    def evaluate():
        out = []
        for s in eval_seeds:
            obs = env.reset(s)
            total, done = 0.0, False
            while not done:
                res = env.step(greedy(obs))
                total += res.reward
                done = res.terminal
                obs = res.observations
            out.append(total)
        return float(np.mean(out))

    replay = deque(maxlen=cfg.replay_capacity)
    steps, last_sync, next_eval = 0, 0, cfg.eval_interval
    curve = []
    while steps < cfg.total_steps:
        obs = env.reset(int(env_rng.integers(2**31)))
        episode = []
        done = False
        while not done:
            g = greedy(obs)
            eps = cfg.epsilon(steps)
            u = explore_rng.random(n)
            r = explore_rng.integers(A, size=n)
            a = np.where(u < eps, r, g)
            res = env.step(a)
            steps += 1
            term = res.terminal and not res.info.get("timeout", 0.0)
            episode.append((obs, a, res.reward, res.observations, term))
            obs = res.observations
            done = res.terminal
        replay.append(episode)
        idx = replay_rng.choice(len(replay), size=min(cfg.batch_episodes, len(replay)), replace=False)
        for k in idx:
            for o, a, rew, o2, term in replay[k]:
                y = rew
                if not term:
                    y += cfg.gamma * sum(get(target, i, o2[i]).max() for i in range(n)) / n
                q = sum(get(Q, i, o[i])[a[i]] for i in range(n)) / n
                err = y - q
                for i in range(n):
                    row = Q.setdefault((i, env.encode(o[i])), np.zeros(A))
                    row[a[i]] += cfg.lr * err / n
        if steps - last_sync >= cfg.target_sync_interval:
            target = {k: v.copy() for k, v in Q.items()}
            last_sync = steps
        if steps >= next_eval:
            curve.append((steps, evaluate()))
            while next_eval <= steps:
                next_eval += cfg.eval_interval
    if steps > 0 and (not curve or curve[-1][0] < steps):
        curve.append((steps, evaluate()))
    return Q, curve
