import numpy as np
import pytest

from parasac.envs import ENVS, load_env_spec, load_reward_table, make_env
from parasac.envs.rewards import RewardTermConfig, compute_reward, penalty_joint_deviation, \
    penalty_joint_limits, penalty_quadratic, reward_termination, reward_track_ang_vel, \
    reward_track_lin_vel
from parasac.errors import ConfigError


def random_actions(env, rng):
    b = env.bounds
    return rng.uniform(b.a_min, b.a_max, (env.num_envs, b.dim))


# reward library --------------------------------------------------------------

def test_track_lin_vel():
    c = np.array([0.5, -0.2])
    assert reward_track_lin_vel(c, c, 0.5, 1.0) == 1.0
    v = c + np.array([0.3, 0.4]) * 0.5 / 0.5      # ||c - v|| = 0.5 = sigma
    assert reward_track_lin_vel(c, v, 0.5, 2.0) == pytest.approx(2.0 * np.exp(-1.0), rel=1e-15)


def test_track_ang_vel():
    assert reward_track_ang_vel(0.4, 0.4, 0.5, 0.5) == 0.5
    assert reward_track_ang_vel(0.0, 1.0, 0.5, 1.0) == pytest.approx(np.exp(-4.0), rel=1e-15)


def test_tracking_requires_positive_sigma():
    with pytest.raises(ConfigError):
        reward_track_lin_vel(np.zeros(2), np.zeros(2), 0.0)
    with pytest.raises(ConfigError):
        RewardTermConfig("track_lin_vel_xy", 1.0, -0.5)


def test_quadratic_penalty():
    assert penalty_quadratic(np.zeros(3), -1.0) == 0.0
    assert penalty_quadratic(np.array([3.0, 4.0]), -2.0) == -50.0
    np.testing.assert_array_equal(penalty_quadratic(np.array([[1.0, 2.0], [0.0, 1.0]]), -1.0),
                                  [-5.0, -1.0])


def test_joint_limit_penalty():
    lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
    assert penalty_joint_limits(np.array([0.5, -0.5]), lo, hi, -1.0) == 0.0
    assert penalty_joint_limits(np.array([1.2, 0.0]), lo, hi, -1.0) == pytest.approx(-0.2)
    assert penalty_joint_limits(np.array([1.1, -1.3]), lo, hi, -1.0) == pytest.approx(-0.4)


def test_joint_deviation_penalty():
    q0 = np.array([0.3, -0.1])
    assert penalty_joint_deviation(q0, q0, -0.2) == 0.0
    assert penalty_joint_deviation(q0 + [0.1, -0.2], q0, -0.2) == pytest.approx(-0.06)


def test_termination_indicator():
    np.testing.assert_array_equal(reward_termination(np.array([True, False]), -200.0),
                                  [-200.0, 0.0])


def test_representational_terms_load_but_do_not_compute():
    cfg = RewardTermConfig.from_dict({"name": "feet_air_time", "weight": 0.125})
    assert not cfg.simulated
    with pytest.raises(ConfigError):
        compute_reward([cfg], {"failure": np.zeros(1, bool)})


def test_unknown_term_rejected():
    with pytest.raises(ConfigError):
        RewardTermConfig.from_dict({"name": "dance", "weight": 1.0})


def test_joint_group_selection():
    terms = [RewardTermConfig.from_dict({"name": "joint_deviation", "weight": -0.2,
                                         "joints": ["b", "c"]})]
    q = {"joint_pos": np.array([[1.0, 2.0, 3.0]]), "default_joint_pos": np.zeros(3),
         "joint_names": ["a", "b", "c"], "failure": np.zeros(1, bool)}
    total, parts = compute_reward(terms, q)
    assert total[0] == pytest.approx(-1.0)
    assert list(parts) == ["joint_deviation[b,c]"]


def test_reward_table_files_load():
    assert {t.name for t in load_reward_table("anymal_bd")} >= {"track_lin_vel_xy", "joint_acc"}
    assert len(load_reward_table("h1")) == 13
    assert len(load_reward_table("unitree_quads")) == 8


# env contract ----------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(ENVS))
def test_reset_is_seeded(name):
    spec = load_env_spec(name, num_envs=8)
    a, b = make_env(spec, 3).reset(), make_env(spec, 3).reset()
    np.testing.assert_array_equal(a, b)
    assert make_env(load_env_spec(name, num_envs=1), 0).reset().shape == (1, spec.obs_dim)


@pytest.mark.parametrize("name", ["point_mass", "pendulum"])
def test_env_streams_differ(name):
    obs = make_env(load_env_spec(name, num_envs=16), 0).reset()
    assert len({tuple(o) for o in obs}) == 16


def test_chain_flags():
    spec = load_env_spec("chain", num_envs=2, horizon=5)
    env = make_env(spec)
    env.reset()
    rng = np.random.default_rng(0)
    for t in range(1, 5):
        r = env.step(random_actions(env, rng))
        assert np.all(r.reward == 1) and np.all(r.done == 0) and np.all(r.timeout == 0)
        np.testing.assert_array_equal(r.obs_pre, r.obs_post)
    r = env.step(random_actions(env, rng))
    assert np.all(r.done == 1) and np.all(r.timeout == 1) and np.all(r.reward == 1)
    np.testing.assert_array_equal(r.obs_pre, [[5.0], [5.0]])
    np.testing.assert_array_equal(r.obs_post, [[0.0], [0.0]])


def test_point_mass_failure_flags():
    env = make_env(load_env_spec("point_mass", num_envs=2))
    env.reset()
    env.pos[0] = [4.999, 0.0]
    env.vel[0] = [1.0, 0.0]
    r = env.step(np.zeros((2, 2)))
    assert r.done[0] == 1 and r.timeout[0] == 0
    assert r.terms["termination"][0] == -20.0 and r.terms["termination"][1] == 0.0
    assert r.done[1] == 0


def test_point_mass_pre_reset_obs_is_dynamics_successor():
    spec = load_env_spec("point_mass", num_envs=3, horizon=4)
    env = make_env(spec)
    obs = env.reset()
    rng = np.random.default_rng(0)
    for _ in range(4):
        a = random_actions(env, rng)
        vel, cmd, pos = obs[:, :2], obs[:, 2:4], obs[:, 4:6] * env.arena
        new_vel = vel + a * spec.dt
        expected = np.concatenate([new_vel, cmd, (pos + new_vel * spec.dt) / env.arena, a], axis=1)
        r = env.step(a)
        np.testing.assert_allclose(r.obs_pre, expected, rtol=1e-12, atol=1e-12)
        obs = r.obs_post
    assert np.all(r.timeout == 1)


@pytest.mark.parametrize("name", sorted(ENVS))
def test_flag_consistency_and_reward_recomputation(name):
    # 1000 envs x 1000 steps = 1e6 random-action steps per env type
    env = make_env(load_env_spec(name, num_envs=1000), 1)
    env.reset()
    rng = np.random.default_rng(2)
    for _ in range(1000):
        r = env.step(random_actions(env, rng))
        assert np.all(r.timeout <= r.done)
        running = r.done == 0
        np.testing.assert_array_equal(r.obs_pre[running], r.obs_post[running])
        np.testing.assert_allclose(r.reward, sum(r.terms.values()), rtol=1e-12, atol=1e-12)


def test_pendulum_asymmetric_bounds():
    env = make_env(load_env_spec("pendulum"))
    np.testing.assert_allclose(env.bounds.a_min, [-2.0])
    np.testing.assert_allclose(env.bounds.a_max, [1.5])


@pytest.mark.parametrize("name", sorted(ENVS))
def test_episode_trace_deterministic(name):
    def trace():
        env = make_env(load_env_spec(name, num_envs=4), 9)
        out = [env.reset()]
        rng = np.random.default_rng(5)
        for _ in range(120):
            r = env.step(random_actions(env, rng))
            out += [r.obs_post, r.obs_pre, r.reward, r.done]
        return out
    for a, b in zip(trace(), trace()):
        np.testing.assert_array_equal(a, b)


def test_env_state_round_trip():
    env = make_env(load_env_spec("point_mass", num_envs=4), 0)
    env.reset()
    rng = np.random.default_rng(0)
    for _ in range(450):
        env.step(random_actions(env, rng))
    state = env.state_dict()
    acts = [random_actions(env, rng) for _ in range(30)]
    ref = [env.step(a).obs_post for a in acts]
    other = make_env(load_env_spec("point_mass", num_envs=4), 0)
    other.reset()
    other.load_state_dict(state)
    for a, o in zip(acts, ref):
        np.testing.assert_array_equal(other.step(a).obs_post, o)


def test_out_of_bounds_action_rejected():
    env = make_env(load_env_spec("pendulum", num_envs=1))
    env.reset()
    with pytest.raises(ValueError):
        env.step(np.array([[1.9]]))


def test_env_spec_validation():
    with pytest.raises(ConfigError):
        load_env_spec("chain", horizon=0)
    with pytest.raises(ConfigError):
        load_env_spec({"env": "nope", "horizon": 1, "dt": 0.1})
