import copy

import numpy as np
import pytest

from radardeploy.deploy_env import DeployEnv, RewardShaper, cvdp_penalty, expr_reward
from radardeploy.detection import PhysicsParams, compute_heatmap, coverage
from radardeploy.geometry import Deployment, RegionSpec, Scenario, make_grid
from radardeploy.nnet import AdamState, adam_step, sigmoid
from radardeploy.policy import (
    EMBED_SIZE,
    PolicyNetwork,
    load_checkpoint,
    save_checkpoint,
)
from radardeploy.ppo import (
    PPOConfig,
    TrainResult,
    clipped_surrogate,
    collect_episode,
    compute_gae,
    curve_to_csv,
    deploy,
    finalize_buffer,
    ppo_update,
    train,
    _unroll,
)

from oracles import gae_by_hand

PARAMS = PhysicsParams()
REGION = RegionSpec()
TOY_GRID = make_grid(REGION, "toy")
SCENARIO = Scenario(((42000, 70000), (48000, 110000), (45000, 85000)))


def toy_setup(seed=0):
    policy = PolicyNetwork.initialized(TOY_GRID, np.random.default_rng(seed))
    env = DeployEnv(PARAMS, REGION, TOY_GRID)
    shaper = RewardShaper.uniform(4)
    return policy, env, shaper


class TestGae:
    def test_lambda_zero_is_one_step_td(self):
        rewards = np.array([0.2, 0.5, 0.1])
        values = np.array([0.4, 0.3, 0.6])
        adv, _ = compute_gae(rewards, values, gamma=1.0, lam=0.0)
        expected = [0.2 + 0.3 - 0.4, 0.5 + 0.6 - 0.3, 0.1 + 0.0 - 0.6]
        np.testing.assert_allclose(adv, expected)

    def test_lambda_one_is_monte_carlo_residual(self):
        rewards = np.array([0.2, 0.5, 0.1])
        values = np.array([0.4, 0.3, 0.6])
        adv, _ = compute_gae(rewards, values, gamma=1.0, lam=1.0)
        expected = [0.8 - 0.4, 0.6 - 0.3, 0.1 - 0.6]
        np.testing.assert_allclose(adv, expected)

    def test_hand_recursion_fixture(self):
        adv, ret = compute_gae(np.array([1.0, 0.0]), np.array([0.5, 0.2]), 1.0, 0.95)
        np.testing.assert_allclose(adv, [0.51, -0.2])
        np.testing.assert_allclose(ret, [1.01, 0.0])

    def test_matches_oracle_on_random(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            n = int(rng.integers(1, 8))
            rewards = rng.normal(size=n)
            values = rng.normal(size=n)
            gamma = float(rng.uniform(0.5, 1.0))
            lam = float(rng.uniform(0.0, 1.0))
            adv, ret = compute_gae(rewards, values, gamma, lam)
            o_adv, o_ret = gae_by_hand(list(rewards), list(values), gamma, lam)
            np.testing.assert_allclose(adv, o_adv, rtol=1e-10)
            np.testing.assert_allclose(ret, o_ret, rtol=1e-10)


class TestClippedSurrogate:
    def test_ratio_one_clip_inactive(self):
        value, flows = clipped_surrogate(1.0, 0.7, 0.2)
        assert value == 0.7 and flows

    def test_positive_advantage_clips_high_ratio(self):
        value, flows = clipped_surrogate(1.5, 1.0, 0.2)
        assert value == pytest.approx(1.2)
        assert not flows

    def test_negative_advantage_clips_low_ratio(self):
        value, flows = clipped_surrogate(0.5, -1.0, 0.2)
        assert value == pytest.approx(-0.8)
        assert not flows

    def test_bound_property(self):
        # the surrogate is a pessimistic lower bound: capped from above at
        # |A|*(1+eps) everywhere, and bounded in magnitude while the ratio
        # stays inside the trust region
        rng = np.random.default_rng(1)
        for _ in range(2000):
            ratio = float(rng.uniform(0.0, 3.0))
            adv = float(rng.normal())
            value, _ = clipped_surrogate(ratio, adv, 0.2)
            assert value <= abs(adv) * 1.2 + 1e-12
            if 0.8 <= ratio <= 1.2:
                assert abs(value) <= abs(adv) * 1.2 + 1e-12


class TestCollect:
    def test_buffer_length_is_horizon(self):
        policy, env, shaper = toy_setup()
        buf = collect_episode(env, policy, SCENARIO, shaper, np.random.default_rng(2))
        assert len(buf) == 4
        assert len(buf.heatmaps) == len(buf.rewards) == len(buf.values) == 4

    def test_rewards_are_shaped_not_raw(self):
        policy, env, shaper = toy_setup()
        buf = collect_episode(env, policy, SCENARIO, shaper, np.random.default_rng(3))
        assert buf.rewards != buf.raw_rewards
        # shaped = expr(raw, prev) + penalty; verify step 0 explicitly
        arc0 = env.arc_normalized(
            env.boundary.arclength_of(env.action_to_radar(buf.actions[0])[0])
        )
        expected = expr_reward(buf.raw_rewards[0], 0.0) + cvdp_penalty(
            shaper.anchors[0], shaper.tolerances[0], arc0
        )
        assert buf.rewards[0] == pytest.approx(expected, rel=1e-12)

    def test_stored_log_probs_recompute_exactly(self):
        policy, env, shaper = toy_setup()
        buf = collect_episode(env, policy, SCENARIO, shaper, np.random.default_rng(4))
        steps = _unroll(policy, buf)
        for t in range(4):
            assert steps[t]["log_prob"] == pytest.approx(buf.log_probs[t], abs=1e-12)

    def test_recurrent_threading_matches_unroll(self):
        policy, env, shaper = toy_setup()
        buf = collect_episode(env, policy, SCENARIO, shaper, np.random.default_rng(5))
        steps = _unroll(policy, buf)
        # the stored per-step input states chain exactly through the unroll
        for t in range(1, 4):
            np.testing.assert_array_equal(buf.rec_h[t], steps[t - 1]["h"])
            np.testing.assert_array_equal(buf.rec_c[t], steps[t - 1]["c"])

    def test_heatmaps_snapshot_prefix_coverage(self):
        policy, env, shaper = toy_setup()
        buf = collect_episode(env, policy, SCENARIO, shaper, np.random.default_rng(6))
        assert not buf.heatmaps[0].any()
        for t, raw in enumerate(buf.raw_rewards[:-1]):
            got = coverage_of(buf.heatmaps[t + 1])
            assert got == pytest.approx(raw, rel=1e-12)


def coverage_of(values):
    return float(np.count_nonzero(values >= PARAMS.detect_threshold)) / values.size


def vanilla_pg_step(policy, buf, opt_state, config):
    """Plain policy-gradient + value-loss update on the same batch."""
    n = len(buf)
    steps = _unroll(policy, buf)
    grads = policy.zero_grads()
    dh = np.zeros(EMBED_SIZE)
    dc = np.zeros(EMBED_SIZE)
    for t in range(n - 1, -1, -1):
        step = steps[t]
        adv = float(buf.advantages[t])
        ret = float(buf.returns[t])
        mu, sigma = step["mu"], step["sigma"]
        d_log_prob = -adv / n
        err = step["value"] - ret
        z = (buf.actions[t] - mu) / sigma
        d_mu = d_log_prob * (z / sigma)
        d_sigma = d_log_prob * ((z * z - 1.0) / sigma)
        d_raw = d_sigma * sigmoid(step["raw_sigma"])
        d_value = 2.0 * config.value_coef * err / n
        d_xp = policy.heads_backward(d_mu, d_raw, d_value, step["head_cache"], grads)
        dh, dc = policy.encode_backward(d_xp[:EMBED_SIZE], dh, dc, step["enc_cache"], grads)
    adam_step(policy.params, grads, opt_state, config.lr_for)


class TestPpoUpdate:
    def test_matches_vanilla_pg_with_clip_inactive(self):
        policy, env, shaper = toy_setup(seed=7)
        buf = collect_episode(env, policy, SCENARIO, shaper, np.random.default_rng(8))
        config = PPOConfig(clip=0.999, epochs=1)
        finalize_buffer(buf, config)

        ppo_policy = PolicyNetwork(TOY_GRID, {k: v.copy() for k, v in policy.params.items()})
        pg_policy = PolicyNetwork(TOY_GRID, {k: v.copy() for k, v in policy.params.items()})
        ppo_update(ppo_policy, buf, AdamState(), config)
        vanilla_pg_step(pg_policy, buf, AdamState(), config)
        for name in policy.params:
            np.testing.assert_allclose(
                ppo_policy.params[name], pg_policy.params[name], atol=1e-10, rtol=0
            )

    def test_advantages_frozen_across_epochs(self):
        policy, env, shaper = toy_setup(seed=9)
        buf = collect_episode(env, policy, SCENARIO, shaper, np.random.default_rng(10))
        config = PPOConfig(epochs=5)
        finalize_buffer(buf, config)
        adv_before = buf.advantages.copy()
        ret_before = buf.returns.copy()
        ppo_update(policy, buf, AdamState(), config)
        np.testing.assert_array_equal(buf.advantages, adv_before)
        np.testing.assert_array_equal(buf.returns, ret_before)

    def test_update_requires_finalized_buffer(self):
        policy, env, shaper = toy_setup(seed=11)
        buf = collect_episode(env, policy, SCENARIO, shaper, np.random.default_rng(12))
        with pytest.raises(ValueError):
            ppo_update(policy, buf, AdamState(), PPOConfig())

    def test_update_moves_parameters(self):
        policy, env, shaper = toy_setup(seed=13)
        buf = collect_episode(env, policy, SCENARIO, shaper, np.random.default_rng(14))
        config = PPOConfig(epochs=2)
        finalize_buffer(buf, config)
        before = {k: v.copy() for k, v in policy.params.items()}
        stats = ppo_update(policy, buf, AdamState(), config)
        assert len(stats["actor_loss"]) == 2
        moved = any(
            not np.array_equal(policy.params[k], before[k]) for k in policy.params
        )
        assert moved


class TestTrain:
    def test_seeded_run_reproducible(self, tmp_path):
        cfg = PPOConfig(episodes=8, epochs=2)
        a = train(cfg, PARAMS, REGION, TOY_GRID, seed=21)
        b = train(cfg, PARAMS, REGION, TOY_GRID, seed=21)
        assert a.curve == b.curve
        for name in a.policy.params:
            np.testing.assert_array_equal(a.policy.params[name], b.policy.params[name])

    def test_checkpoint_roundtrip(self, tmp_path):
        ckpt = str(tmp_path / "model.ckpt")
        cfg = PPOConfig(episodes=3, epochs=1, checkpoint_interval=2)
        result = train(cfg, PARAMS, REGION, TOY_GRID, seed=22, checkpoint_path=ckpt)
        params, opt = load_checkpoint(ckpt)
        for name in result.policy.params:
            np.testing.assert_array_equal(params[name], result.policy.params[name])
            np.testing.assert_array_equal(opt.m[name], result.opt_state.m[name])
            np.testing.assert_array_equal(opt.v[name], result.opt_state.v[name])
        assert opt.count == result.opt_state.count

    def test_curve_csv_format(self, tmp_path):
        curve_path = tmp_path / "curve.csv"
        cfg = PPOConfig(episodes=2, epochs=1)
        result = train(
            cfg, PARAMS, REGION, TOY_GRID, seed=23, curve_path=str(curve_path)
        )
        text = curve_path.read_text()
        lines = text.strip().splitlines()
        assert lines[0] == "episode,raw_coverage,shaped_return"
        assert len(lines) == 3
        assert curve_to_csv(result.curve) == text

    def test_curve_values_in_range(self):
        cfg = PPOConfig(episodes=4, epochs=1)
        result = train(cfg, PARAMS, REGION, TOY_GRID, seed=24)
        for episode, raw, shaped in result.curve:
            assert 0.0 <= raw <= 1.0


class TestDeploy:
    def test_deterministic_across_runs(self):
        policy, _, _ = toy_setup(seed=25)
        r1 = deploy(policy, PARAMS, REGION, SCENARIO)
        r2 = deploy(policy, PARAMS, REGION, SCENARIO)
        assert r1.deployment == r2.deployment
        assert r1.coverage == r2.coverage

    def test_coverage_matches_engine_recompute(self):
        policy, _, _ = toy_setup(seed=26)
        full = make_grid(REGION, "full")
        result = deploy(policy, PARAMS, REGION, SCENARIO)
        hm = compute_heatmap(PARAMS, result.deployment, SCENARIO, full)
        assert result.coverage == coverage_of_grid(hm)

    def test_wall_time_positive_and_trace_complete(self):
        policy, _, _ = toy_setup(seed=27)
        result = deploy(policy, PARAMS, REGION, SCENARIO)
        assert result.wall_time > 0.0
        assert len(result.trace) == 4
        assert len(result.deployment.radars) == 4


def coverage_of_grid(hm):
    return float(np.count_nonzero(hm.values >= PARAMS.detect_threshold)) / hm.values.size
