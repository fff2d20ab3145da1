import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsecg import ConfigError, InvalidArgument
from sparsecg.envs import REGISTRY, config_to_dict, env_config, make_env
from sparsecg.envs.aloha import AlohaConfig, AlohaState, aloha_step
from sparsecg.envs.disperse import DisperseConfig, DisperseState, disperse_step
from sparsecg.envs.gather import GatherConfig, GatherState, gather_outcome, gather_step
from sparsecg.envs.hallway import HallwayConfig, HallwayState, hallway_step
from sparsecg.envs.pursuit import PursuitConfig, PursuitState, pursuit_step
from sparsecg.envs.sensor import SensorConfig, SensorState, sensor_step

SMALL = {
    "aloha": dict(rows=2, cols=2),
    "pursuit": dict(height=5, width=5, n_agents=3, n_prey=1, horizon=8),
    "hallway": dict(group_sizes=(2, 1), horizon=8),
    "sensor": dict(rows=2, cols=3, n_targets=2, horizon=8),
    "gather": dict(height=5, width=5, n_agents=3, horizon=8),
    "disperse": dict(n_agents=4, n_hospitals=2, horizon=8),
}


def _rollout(env, seed, steps=None):
    rng = np.random.default_rng(seed)
    obs = [env.reset(seed)]
    rewards, infos = [], []
    while True:
        a = rng.integers(env.n_actions, size=env.n_agents)
        res = env.step(a)
        obs.append(res.observations)
        rewards.append(res.reward)
        infos.append(res.info)
        if res.terminal:
            return obs, rewards, infos


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_seeded_rollouts_repeat(name):
    env = make_env(name, SMALL[name])
    assert _rollout(env, 5) == _rollout(env, 5)


@pytest.mark.parametrize("name", sorted(REGISTRY))
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_observations_encode_and_rewards_bounded(name, seed):
    env = make_env(name, SMALL[name])
    obs, rewards, infos = _rollout(env, seed)
    lo, hi = env.reward_bounds()
    assert len(rewards) <= env.horizon
    for r in rewards:
        assert lo - 1e-12 <= r <= hi + 1e-12
    for step in obs:
        assert len(step) == env.n_agents
        for o in step:
            code = env.encode(o)
            assert 0 <= code < env.obs_size and env.decode(code) == o
    if infos[-1]["timeout"]:
        assert len(rewards) == env.horizon


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_step_after_done_and_bad_actions(name):
    env = make_env(name, SMALL[name])
    env.reset(0)
    with pytest.raises(InvalidArgument):
        env.step([env.n_actions] * env.n_agents)
    with pytest.raises(InvalidArgument):
        env.step([0] * (env.n_agents + 1))
    _rollout(env, 0)
    with pytest.raises(InvalidArgument):
        env.step([0] * env.n_agents)


def test_env_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        env_config("aloha", dict(colour="red"))
    with pytest.raises(ConfigError):
        env_config("chess")
    with pytest.raises(ConfigError):
        env_config("sensor", dict(rows=1, cols=1))


def test_config_to_dict_round_trip():
    cfg = env_config("hallway", dict(group_sizes=[2, 2], chain_lengths=[3, 4, 5, 6]))
    assert env_config("hallway", config_to_dict(cfg)) == cfg


# -- hand-built dynamics -----------------------------------------------------------

def test_aloha_collision_and_success():
    cfg = AlohaConfig(rows=1, cols=3, arrival_prob=0.0)
    nb = [np.array([1]), np.array([0, 2]), np.array([1])]
    st_ = AlohaState(cfg, np.array([1, 1, 0]), nb)
    res = aloha_step(st_, np.array([1, 1, 1]), np.random.default_rng(0))
    # agents 0 and 1 collide; agent 2 sends with an empty buffer (idle)
    assert res.reward == -2 * cfg.collision_penalty
    assert st_.backlog.tolist() == [1, 1, 0]
    res = aloha_step(st_, np.array([1, 0, 0]), np.random.default_rng(0))
    assert res.reward == pytest.approx(cfg.success_reward)
    assert st_.backlog.tolist() == [0, 1, 0]


def _pursuit_state(cfg, pred, prey):
    return PursuitState(cfg, np.array(pred), np.ones(len(pred), bool), np.array(prey), np.ones(len(prey), bool))


def test_pursuit_joint_catch_and_punishment():
    cfg = PursuitConfig(height=5, width=5, n_agents=3, n_prey=1, sight_radius=1)
    st_ = _pursuit_state(cfg, [[1, 1], [1, 3], [4, 4]], [[1, 2]])
    res = pursuit_step(st_, np.array([0, 5, 0]), np.random.default_rng(0))
    assert res.reward == -cfg.punishment and res.info["lone_catches"] == 1
    st_ = _pursuit_state(cfg, [[1, 1], [1, 3], [4, 4]], [[1, 2]])
    res = pursuit_step(st_, np.array([5, 5, 0]), np.random.default_rng(0))
    assert res.reward == cfg.capture_reward and res.terminal
    assert st_.pred_alive.tolist() == [False, False, True]


def test_pursuit_out_of_sight_catch_is_invalid():
    cfg = PursuitConfig(height=6, width=6, n_agents=2, n_prey=1, sight_radius=1)
    st_ = _pursuit_state(cfg, [[0, 0], [5, 5]], [[3, 3]])
    res = pursuit_step(st_, np.array([5, 5]), np.random.default_rng(0))
    assert res.reward == 0.0 and res.info["invalid_catches"] == 2


def test_pursuit_direction_codes():
    cfg = PursuitConfig(height=7, width=7, n_agents=2, n_prey=1, sight_radius=2, offset_mode="direction",
                        observe_position=False, observe_predators=False)
    st_ = _pursuit_state(cfg, [[3, 3], [0, 0]], [[3, 4]])
    assert st_.observe(0) == (0, 0)
    st_.prey[0] = [1, 5]
    # up-right octant: sign (-1, +1) -> index 2 -> code 3
    assert st_.observe(0) == (0, 3)
    st_.prey[0] = [6, 6]
    assert st_.observe(0) == (0, cfg.n_offset_codes - 1)


def test_hallway_win_clash_and_partial():
    cfg = HallwayConfig(group_sizes=(2, 1), chain_lengths=(1, 1, 1))
    st_ = HallwayState(cfg, np.array([1, 1, 1]), np.ones(2, bool))
    res = hallway_step(st_, np.array([0, 0, 2]), np.random.default_rng(0))
    assert res.reward == cfg.win_reward and st_.group_alive.tolist() == [False, True]
    st_ = HallwayState(cfg, np.array([1, 1, 1]), np.ones(2, bool))
    res = hallway_step(st_, np.array([0, 0, 0]), np.random.default_rng(0))
    assert res.reward == -2 * cfg.clash_penalty and st_.pos.tolist() == [1, 1, 1]
    st_ = HallwayState(cfg, np.array([1, 1, 1]), np.ones(2, bool))
    res = hallway_step(st_, np.array([0, 2, 2]), np.random.default_rng(0))
    assert res.reward == 0.0 and st_.group_alive.tolist() == [False, True]
    assert res.observations[0] == (2,)


def test_sensor_scoring():
    cfg = SensorConfig(rows=2, cols=2, n_targets=1)
    st_ = SensorState(cfg, np.array([[1, 1]]))
    # agents 0 (0,0) and 1 (0,1) scan (1,1): offsets (1,1) -> 8 and (1,0) -> 7
    res = sensor_step(st_, np.array([8, 7, 0, 0]), np.random.default_rng(0))
    assert res.reward == pytest.approx(-2 * cfg.scan_cost + 2 * cfg.reward_per_scanner)
    st_ = SensorState(cfg, np.array([[1, 1]]))
    res = sensor_step(st_, np.array([8, 0, 0, 0]), np.random.default_rng(0))
    assert res.reward == -cfg.scan_cost and res.info["targets_scanned"] == 0


def test_gather_outcomes():
    cfg = GatherConfig(height=4, width=4, n_agents=3)
    assert gather_outcome(cfg, np.array([1, 1, 1]), 1) == cfg.optimal_reward
    assert gather_outcome(cfg, np.array([1, 0, -1]), 1) == -cfg.partial_penalty
    assert gather_outcome(cfg, np.array([0, 0, 0]), 1) == cfg.suboptimal_reward
    assert gather_outcome(cfg, np.array([0, 2, -1]), 1) == 0.0
    st_ = GatherState(cfg, np.array([[0, 1], [1, 0], [2, 2]]), 0, np.zeros(3, bool))
    res = gather_step(st_, np.array([3, 1, 0]), np.random.default_rng(0))
    assert not res.terminal
    res = gather_step(st_, np.array([0, 0, 0]), np.random.default_rng(0))
    assert res.observations[2] == (10, len(cfg.goals))


def test_disperse_shortfall():
    cfg = DisperseConfig(n_agents=3, n_hospitals=2)
    st_ = DisperseState(cfg, np.zeros(3, dtype=np.int64), 1, 2)
    res = disperse_step(st_, np.array([1, 0, 0]), np.random.default_rng(0))
    assert res.reward == -1.0 and res.info["shortfall"] == 1.0
    obs = res.observations
    assert all(o[1] == (st_.need if o[0] == st_.hospital else 0) for o in obs)
