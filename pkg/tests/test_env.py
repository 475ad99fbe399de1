import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from magnocool.dynamics import occupancies, symplectic_eigenvalues
from magnocool.env import (
    INVERSE_QUOTIENT,
    INVERSE_QUOTIENT_MINUS_MAGNON,
    CoolingEnv,
    EnvConfig,
    RewardSpec,
    action_map,
    bipartite_env_config,
    replay,
    rollout,
    tripartite_env_config,
)
from magnocool.trace import write_trace


def test_reset_is_thermal_and_deterministic():
    env = CoolingEnv(bipartite_env_config())
    o1 = env.reset()
    env.step([0.3, -0.2])
    o2 = env.reset()
    np.testing.assert_array_equal(o1, o2)
    assert o1.shape == (env.obs_dim,) == (12,)
    np.testing.assert_allclose(occupancies(env.state), [0.0, 100.0], atol=1e-12)


def test_zero_action_keeps_reward_at_one():
    env = CoolingEnv(bipartite_env_config())
    env.reset()
    rewards = [env.step([0.0, 0.0])[1] for _ in range(50)]
    np.testing.assert_allclose(rewards, 1.0, rtol=1e-10)
    assert env.done
    assert env.trace().net_reward == pytest.approx(50.0, rel=1e-10)


def test_reward_arithmetic():
    r = RewardSpec(INVERSE_QUOTIENT, 100.0)
    assert r(np.array([0.5, 1.0]), 1) == pytest.approx(100.0)
    r = RewardSpec(INVERSE_QUOTIENT_MINUS_MAGNON, 100.0, 10.0)
    assert r(np.array([0.0, 0.05, 1.0]), 2, 1) == pytest.approx(99.5)
    with pytest.raises(ValueError):
        r(np.array([0.0, 0.05, 1.0]), 2, None)
    with pytest.raises(ValueError):
        RewardSpec("nope")


def test_action_map_examples():
    bip = bipartite_env_config(g_max_over_sqrt2=5.0)
    np.testing.assert_allclose(action_map(bip, [1.0, 0.0]), [5.0 + 0j])
    np.testing.assert_allclose(action_map(bip, [1.0, 1.0]), [5.0 + 5.0j])
    np.testing.assert_allclose(action_map(bip, [-1.0, -1.0]), [-5.0 - 5.0j])
    tri = tripartite_env_config(omega_max=8.0)
    np.testing.assert_allclose(action_map(tri, [-1.0, 1.0]), [0.0, 8.0])
    np.testing.assert_allclose(action_map(tri, [0.0, 0.0]), [4.0, 4.0])


def test_dimensions():
    tri = tripartite_env_config()
    assert tri.action_dim == 2 and tri.obs_dim == 21 + 2
    assert tri.magnon_mode == 1
    assert bipartite_env_config().magnon_mode == 0


def test_done_and_step_after_done():
    env = CoolingEnv(bipartite_env_config(steps_per_episode=3))
    env.reset()
    assert [env.step([0, 0])[2] for _ in range(3)] == [False, False, True]
    with pytest.raises(RuntimeError):
        env.step([0, 0])


def test_clipping_is_counted():
    env = CoolingEnv(bipartite_env_config())
    env.reset()
    env.step([2.0, 0.0])
    env.step([0.5, 0.0])
    env.step([-1.0, -3.0])
    assert env.n_clipped == 2
    np.testing.assert_allclose(env.trace().actions[0], [1.0, 0.0])


def test_non_finite_action_aborts():
    env = CoolingEnv(bipartite_env_config())
    env.reset()
    env.step([0.1, 0.1])
    with pytest.raises(ValueError, match="after 1 steps"):
        env.step([np.nan, 0.0])
    assert env.done


def test_config_validation():
    cfg = bipartite_env_config()
    from dataclasses import replace
    for bad in (dict(steps_per_episode=0), dict(dt=0.0), dict(control_max=(0.0,)),
                dict(action_kind="x"), dict(obs_transform="x"), dict(obs_scale=0.0),
                dict(control_max=(1.0, 1.0))):
        with pytest.raises(ValueError):
            replace(cfg, **bad)


def test_config_hash_ignores_seed_and_name():
    a = bipartite_env_config(seed=1)
    b = bipartite_env_config(seed=2)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != bipartite_env_config(g_max_over_sqrt2=1.0).config_hash()
    assert a.interface_hash() == bipartite_env_config(g_max_over_sqrt2=1.0).interface_hash()
    assert a.interface_hash() != tripartite_env_config().interface_hash()


def test_replay_reproduces_rollout():
    cfg = tripartite_env_config(steps_per_episode=20)
    rng = np.random.default_rng(3)
    acts = rng.uniform(-1, 1, (20, 2))
    it = iter(acts)
    tr = rollout(CoolingEnv(cfg), lambda o: next(it))
    tr2 = replay(cfg, tr.controls, tr.actions)
    assert write_trace(tr) == write_trace(tr2)
    short = replay(cfg, tr.controls[:5])
    assert len(short) == 5 and short.actions is None


def test_linear_observation_transform():
    from dataclasses import replace
    cfg = replace(bipartite_env_config(), obs_transform="linear")
    env = CoolingEnv(cfg)
    obs = env.reset()
    # upper triangle of sigma / n_T: phonon quadratures at (n_T + 1/2) / n_T
    assert obs[7] == pytest.approx(100.5 / 100) and obs[9] == pytest.approx(100.5 / 100)
    assert np.allclose(CoolingEnv(bipartite_env_config()).reset()[:-2], np.log1p(np.abs(obs[:-2])))


@settings(max_examples=20, deadline=None)
@given(actions=arrays(np.float64, (15, 2), elements=st.floats(-1, 1)))
def test_random_actions_keep_state_physical(actions):
    env = CoolingEnv(tripartite_env_config(steps_per_episode=15))
    env.reset()
    for a in actions:
        obs, r, _ = env.step(a)
        assert np.all(np.isfinite(obs)) and np.isfinite(r)
        nu = symplectic_eigenvalues(env.state.sigma)
        assert nu.min() >= 0.5 - 1e-8 * max(1.0, np.abs(env.state.sigma).max())
