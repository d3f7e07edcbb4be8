"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s`.  The slow criteria are the
full-configuration evolutionary benchmark (several minutes) and the
desk-scale training run (~2 minutes).
"""

import time

import numpy as np
import pytest

from radardeploy.bench import SolverSettings, efficiency, solve_scenario
from radardeploy.deploy_env import (
    DeployEnv,
    RewardShaper,
    cvdp_penalty,
    expr_reward,
    shaped_reward,
)
from radardeploy.detection import (
    PhysicsParams,
    compute_heatmap,
    coverage,
    noise_power,
)
from radardeploy.evolve import GAConfig, PSOConfig
from radardeploy.geometry import (
    Deployment,
    GridSpec,
    RegionSpec,
    Scenario,
    make_grid,
    sample_dataset,
)
from radardeploy.nnet import AdamState
from radardeploy.policy import PolicyNetwork
from radardeploy.ppo import (
    PPOConfig,
    clipped_surrogate,
    collect_episode,
    deploy,
    finalize_buffer,
    ppo_update,
    train,
)

from oracles import naive_heatmap
from test_policy import episode_loss, episode_loss_grads
from test_ppo import vanilla_pg_step

PARAMS = PhysicsParams()
REGION = RegionSpec()
FULL_GRID = make_grid(REGION, "full")
TRAIN_GRID = make_grid(REGION, "training")
TOY_GRID = make_grid(REGION, "toy")
TAU = PARAMS.detect_threshold


def report_line(number: int, detail: str):
    print(f"\n[criterion {number:2d}] PASS  {detail}")


@pytest.fixture(scope="module")
def solver_results():
    """Full-paper-config runs of all four evolutionary methods over the same
    20 scenarios (shared by criteria 4 and 5)."""
    scenarios = sample_dataset(20, seed=424242, region=REGION)
    settings = SolverSettings(ga=GAConfig(), pso=PSOConfig())  # paper configs
    start = time.perf_counter()
    covs = {}
    for method in ("ga1d", "pso1d", "ga", "pso"):
        per = []
        for sid, sc in enumerate(scenarios):
            dep, _ = solve_scenario(method, sc, 1000 ^ sid, settings)
            per.append(coverage(compute_heatmap(PARAMS, dep, sc, FULL_GRID), TAU))
        covs[method] = per
    elapsed = time.perf_counter() - start
    return covs, elapsed


class TestCriterion1PhysicsOracle:
    def test_heatmap_matches_naive_triple_loop(self):
        grid = GridSpec(3e4, 6e4, 2000.0, 2000.0, 10, 10)
        rng = np.random.default_rng(101)
        start = time.perf_counter()
        worst = 0.0
        for _ in range(1000):
            radars = tuple(
                (int(rng.integers(3e4, 4e4 + 1)), int(rng.integers(0, 6e4 + 1)))
                for _ in range(4)
            )
            jammers = tuple(
                (int(rng.integers(4e4, 5e4 + 1)), int(rng.integers(6e4, 1.2e5 + 1)))
                for _ in range(3)
            )
            hm = compute_heatmap(PARAMS, Deployment(radars), Scenario(jammers), grid)
            oracle = np.array(naive_heatmap(PARAMS, radars, jammers, grid))
            rel = np.max(np.abs(hm.values - oracle) / np.maximum(np.abs(oracle), 1e-300))
            worst = max(worst, float(rel))
            assert rel <= 1e-12
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0
        report_line(1, f"1000 pairs, worst relative error {worst:.2e}, {elapsed:.1f}s")


class TestCriterion2NoisePower:
    def test_default_noise_power(self):
        p_n = noise_power(PARAMS)
        assert abs(p_n - 1.189e-10) / 1.189e-10 < 1e-3
        report_line(2, f"P_n = {p_n:.4e} W (target 1.189e-10 within 0.1%)")


class TestCriterion3EfficiencyCalibration:
    def test_both_reported_rows_reproduce(self):
        fast = efficiency(0.9394, 0.25)
        slow = efficiency(0.9375, 1494.0)
        assert fast == pytest.approx(4.21, abs=0.01)
        assert slow == pytest.approx(0.13, abs=0.005)
        report_line(3, f"(0.9394, 0.25s) -> {fast:.3f}; (0.9375, 1494s) -> {slow:.3f}")


class TestCriterion4EvolutionaryBand:
    def test_boundary_solver_coverage_band(self, solver_results):
        covs, elapsed = solver_results
        ga1d = float(np.mean(covs["ga1d"]))
        pso1d = float(np.mean(covs["pso1d"]))
        assert 0.88 <= ga1d <= 0.97, f"GA1D mean {ga1d}"
        assert 0.88 <= pso1d <= 0.97, f"PSO1D mean {pso1d}"
        assert elapsed < 1800.0, f"solver benchmark took {elapsed:.0f}s"
        report_line(
            4,
            f"GA1D {ga1d:.4f}, PSO1D {pso1d:.4f} over 20 scenarios "
            f"(band [0.88, 0.97]); all four solvers in {elapsed:.0f}s",
        )

    def test_heatmap_evaluation_speed(self):
        dep = Deployment(((38750, 60000), (40000, 43750), (40000, 26250), (40000, 8750)))
        sc = Scenario(((42000, 70000), (48000, 110000), (45000, 85000)))
        compute_heatmap(PARAMS, dep, sc, TRAIN_GRID)  # warm the mesh cache
        start = time.perf_counter()
        for _ in range(5):
            compute_heatmap(PARAMS, dep, sc, TRAIN_GRID)
        per_training = (time.perf_counter() - start) / 5
        compute_heatmap(PARAMS, dep, sc, FULL_GRID)
        start = time.perf_counter()
        compute_heatmap(PARAMS, dep, sc, FULL_GRID)
        per_full = time.perf_counter() - start
        assert per_training < 0.050
        assert per_full < 2.0
        report_line(
            4, f"(speed) training grid {per_training*1000:.1f} ms, full grid {per_full:.2f} s"
        )


class TestCriterion5BoundaryVsRegion:
    def test_boundary_outperforms_region(self, solver_results):
        covs, _ = solver_results
        ga1d = float(np.mean(covs["ga1d"]))
        ga = float(np.mean(covs["ga"]))
        pso1d = float(np.mean(covs["pso1d"]))
        pso = float(np.mean(covs["pso"]))
        assert ga1d >= ga - 0.005, f"GA1D {ga1d} vs GA {ga}"
        assert pso1d >= pso - 0.005, f"PSO1D {pso1d} vs PSO {pso}"
        report_line(
            5, f"GA1D {ga1d:.4f} >= GA {ga:.4f} - 0.005; PSO1D {pso1d:.4f} >= PSO {pso:.4f} - 0.005"
        )


class TestCriterion6GradientSuite:
    def test_layer_and_end_to_end_gradients(self):
        from radardeploy.nnet import (
            conv2d,
            conv2d_backward,
            dense,
            dense_backward,
            lstm_cell,
            lstm_cell_backward,
            maxpool2,
            maxpool2_backward,
        )

        start = time.perf_counter()
        rng = np.random.default_rng(606)
        eps = 1e-6

        def fd_ok(fn, x, analytic, n_probe, tol):
            flat = x.reshape(-1)
            idxs = rng.choice(flat.size, size=min(n_probe, flat.size), replace=False)
            for i in idxs:
                orig = flat[i]
                flat[i] = orig + eps
                f_plus = fn()
                flat[i] = orig - eps
                f_minus = fn()
                flat[i] = orig
                num = (f_plus - f_minus) / (2 * eps)
                ana = analytic.reshape(-1)[i]
                assert abs(num - ana) <= tol * max(abs(num), abs(ana), 1e-3), (
                    f"analytic {ana} vs numeric {num}"
                )

        # conv layer
        x = rng.normal(size=(2, 7, 6))
        k = rng.normal(size=(3, 3, 2, 5))
        dout = rng.normal(size=(5, 5, 4))
        _, cache = conv2d(x, k)
        dx, dk = conv2d_backward(dout, cache)
        loss = lambda: float(np.sum(conv2d(x, k)[0] * dout))
        fd_ok(loss, x, dx, 10, 1e-5)
        fd_ok(loss, k, dk, 10, 1e-5)
        # pooling
        xp_ = rng.normal(size=(3, 6, 4))
        dp = rng.normal(size=(3, 3, 2))
        _, pcache = maxpool2(xp_)
        dxp = maxpool2_backward(dp, pcache)
        fd_ok(lambda: float(np.sum(maxpool2(xp_)[0] * dp)), xp_, dxp, 10, 1e-5)
        # dense
        w = rng.normal(size=(4, 9))
        b = rng.normal(size=4)
        xv = rng.normal(size=9)
        dv = rng.normal(size=4)
        dxv, dw, db = dense_backward(dv, xv, w)
        fd_ok(lambda: float(np.sum(dense(xv, w, b) * dv)), w, dw, 10, 1e-5)
        fd_ok(lambda: float(np.sum(dense(xv, w, b) * dv)), b, db, 4, 1e-5)
        fd_ok(lambda: float(np.sum(dense(xv, w, b) * dv)), xv, dxv, 9, 1e-5)
        # lstm cell
        n = 6
        wx = rng.normal(size=(4 * n, n), scale=0.5)
        wh = rng.normal(size=(4 * n, n), scale=0.5)
        bb = rng.normal(size=4 * n, scale=0.2)
        xl = rng.normal(size=n)
        hl = rng.normal(size=n)
        cl = rng.normal(size=n)
        tgt = rng.normal(size=n)

        def lstm_loss():
            y, _, _, _ = lstm_cell(xl, hl, cl, wx, wh, bb)
            return float(np.sum(y * tgt))

        _, _, _, lcache = lstm_cell(xl, hl, cl, wx, wh, bb)
        _, _, _, dwx, dwh, dbb = lstm_cell_backward(tgt, np.zeros(n), lcache, wx, wh)
        fd_ok(lstm_loss, wx, dwx, 10, 1e-5)
        fd_ok(lstm_loss, wh, dwh, 10, 1e-5)
        fd_ok(lstm_loss, bb, dbb, 10, 1e-5)

        # end-to-end policy on the full three-stage architecture
        policy = PolicyNetwork.initialized(TRAIN_GRID, np.random.default_rng(607))
        ep_rng = np.random.default_rng(608)
        episode = []
        for t in range(4):
            m = ep_rng.uniform(0, 1, (TRAIN_GRID.ny, TRAIN_GRID.nx))
            episode.append(
                (
                    m,
                    (m >= 0.5).astype(float),
                    ep_rng.uniform(0, 1, 6),
                    ep_rng.uniform(0, 1, 8),
                    np.eye(4)[t],
                    ep_rng.uniform(0, 1, 2),
                )
            )
        coefs = ep_rng.uniform(-1, 1, 4)
        targets = ep_rng.uniform(0, 1, 4)
        grads = episode_loss_grads(policy, episode, coefs, targets)
        checked = 0
        for name, arr in policy.params.items():
            flat = arr.reshape(-1)
            idxs = rng.choice(flat.size, size=min(3, flat.size), replace=False)
            for i in idxs:
                orig = flat[i]
                flat[i] = orig + eps
                f_plus = episode_loss(policy, episode, coefs, targets)
                flat[i] = orig - eps
                f_minus = episode_loss(policy, episode, coefs, targets)
                flat[i] = orig
                num = (f_plus - f_minus) / (2 * eps)
                ana = grads[name].reshape(-1)[i]
                assert abs(num - ana) <= 1e-4 * max(abs(num), abs(ana), 1e-3), (
                    f"{name}[{i}]: analytic {ana} vs numeric {num}"
                )
                checked += 1
        elapsed = time.perf_counter() - start
        assert elapsed < 120.0
        report_line(
            6,
            f"layers at 1e-5, end-to-end ({checked} coordinates) at 1e-4, {elapsed:.0f}s",
        )


class TestCriterion7PpoSanity:
    def test_vanilla_pg_equivalence_and_clip_fixtures(self):
        policy = PolicyNetwork.initialized(TOY_GRID, np.random.default_rng(700))
        env = DeployEnv(PARAMS, REGION, TOY_GRID)
        shaper = RewardShaper.uniform(4)
        scenario = Scenario(((42000, 70000), (48000, 110000), (45000, 85000)))
        buf = collect_episode(env, policy, scenario, shaper, np.random.default_rng(701))
        config = PPOConfig(clip=0.999, epochs=1)
        finalize_buffer(buf, config)
        ppo_policy = PolicyNetwork(TOY_GRID, {k: v.copy() for k, v in policy.params.items()})
        pg_policy = PolicyNetwork(TOY_GRID, {k: v.copy() for k, v in policy.params.items()})
        ppo_update(ppo_policy, buf, AdamState(), config)
        vanilla_pg_step(pg_policy, buf, AdamState(), config)
        worst = 0.0
        for name in policy.params:
            delta = np.max(np.abs(ppo_policy.params[name] - pg_policy.params[name]))
            worst = max(worst, float(delta))
            assert delta <= 1e-10, f"{name} differs by {delta}"
        # clip arithmetic fixtures hold exactly
        assert clipped_surrogate(1.0, 0.37, 0.2)[0] == 0.37
        assert clipped_surrogate(1.5, 1.0, 0.2)[0] == 1.2
        assert clipped_surrogate(0.5, -1.0, 0.2)[0] == -0.8
        report_line(
            7, f"actor step equals vanilla PG (max param delta {worst:.1e}); clip fixtures exact"
        )


class TestCriterion8DeskScaleLearning:
    def test_trained_policy_beats_baselines(self):
        start = time.perf_counter()
        test_scenarios = sample_dataset(20, seed=20260809, region=REGION)
        env = DeployEnv(PARAMS, REGION, TOY_GRID)
        shaper = RewardShaper.uniform(4)
        anchor_dep = env.anchor_deployment(shaper)
        anchor = float(
            np.mean(
                [
                    coverage(compute_heatmap(PARAMS, anchor_dep, sc, TOY_GRID), TAU)
                    for sc in test_scenarios
                ]
            )
        )
        rng = np.random.default_rng(77)
        random_covs = []
        for sc in test_scenarios:
            state = env.reset(sc)
            raw = 0.0
            for _ in range(4):
                state, raw = env.step(state, rng.uniform(0, 1, 2))
            random_covs.append(raw)
        random_baseline = float(np.mean(random_covs))

        result = train(PPOConfig(episodes=2000), PARAMS, REGION, TOY_GRID, seed=1)
        tail = result.curve[-100:]
        learned = float(np.mean([row[1] for row in tail]))
        elapsed = time.perf_counter() - start
        assert learned > anchor, f"learned {learned} vs anchor {anchor}"
        assert learned > random_baseline, f"learned {learned} vs random {random_baseline}"
        assert elapsed < 1200.0
        report_line(
            8,
            f"final-100 mean {learned:.4f} > anchor {anchor:.4f} > random "
            f"{random_baseline:.4f}; {elapsed:.0f}s",
        )


class TestCriterion9RewardShaping:
    def test_worked_fixtures_and_telescoping(self):
        assert cvdp_penalty(0.5, 0.125, 0.5 + 0.15) == pytest.approx(-0.325, abs=1e-9)
        assert cvdp_penalty(0.5, 0.125, 0.5 + 0.25) == pytest.approx(-0.125, abs=1e-9)
        assert expr_reward(0.9, 0.5) == pytest.approx(0.4781, abs=5e-5)
        assert shaped_reward(expr_reward(0.9, 0.5), -0.325) == pytest.approx(
            0.1531, abs=5e-5
        )
        # penalty-free episodes telescope: actions at the anchors themselves
        env = DeployEnv(PARAMS, REGION, TOY_GRID)
        shaper = RewardShaper.uniform(4)
        rng = np.random.default_rng(909)
        for _ in range(20):
            scenario = Scenario(
                tuple(
                    (int(rng.integers(4e4, 5e4 + 1)), int(rng.integers(6e4, 1.2e5 + 1)))
                    for _ in range(3)
                )
            )
            state = env.reset(scenario)
            total = 0.0
            raw = 0.0
            for t in range(4):
                # action mapped so the snapped radar sits inside the anchor band
                arc = shaper.anchors[t] * env.boundary.total_length
                x, y = env.boundary.point_at(arc)
                action = np.array(
                    [
                        (x - REGION.deploy_x[0]) / 1e4,
                        (y - REGION.deploy_y[0]) / 6e4,
                    ]
                )
                prev = state.prev_coverage
                state, raw = env.step(state, action)
                arc_norm = env.arc_normalized(state.arclengths[-1])
                penalty = shaper.penalty(t, arc_norm)
                assert penalty == 0.0
                total += shaper.shape(t, raw, prev, arc_norm)
            assert total == pytest.approx((10.0**raw - 1.0) / 10.0, rel=1e-12)
        report_line(9, "CVDP/EXPR fixtures at 1e-9; telescoping identity at 1e-12")


class TestCriterion10InferenceSpeed:
    def test_deploy_under_one_second(self):
        policy = PolicyNetwork.initialized(TRAIN_GRID, np.random.default_rng(1000))
        scenario = Scenario(((42000, 70000), (48000, 110000), (45000, 85000)))
        deploy(policy, PARAMS, REGION, scenario)  # warm caches
        result = deploy(policy, PARAMS, REGION, scenario)
        assert result.wall_time < 1.0
        assert len(result.deployment.radars) == 4
        report_line(
            10, f"deploy wall time {result.wall_time*1000:.0f} ms (< 1 s, full-grid scoring untimed)"
        )


class TestCriterion11Determinism:
    def test_all_seeded_entry_points_reproduce(self):
        # dataset generation
        assert sample_dataset(50, 7, REGION) == sample_dataset(50, 7, REGION)
        # solvers (bit-identical deployments and coverages)
        settings = SolverSettings(
            ga=GAConfig(population=10, iterations=5),
            pso=PSOConfig(swarm=6, iterations=5),
            fitness_grid="toy",
        )
        scenario = Scenario(((42000, 70000), (48000, 110000), (45000, 85000)))
        for method in ("ga", "pso", "ga1d", "pso1d"):
            d1, _ = solve_scenario(method, scenario, 3, settings)
            d2, _ = solve_scenario(method, scenario, 3, settings)
            assert d1 == d2, method
        # training
        cfg = PPOConfig(episodes=10, epochs=2)
        r1 = train(cfg, PARAMS, REGION, TOY_GRID, seed=5)
        r2 = train(cfg, PARAMS, REGION, TOY_GRID, seed=5)
        assert r1.curve == r2.curve
        for name in r1.policy.params:
            np.testing.assert_array_equal(r1.policy.params[name], r2.policy.params[name])
        # deployment inference
        a = deploy(r1.policy, PARAMS, REGION, scenario)
        b = deploy(r2.policy, PARAMS, REGION, scenario)
        assert a.deployment == b.deployment and a.coverage == b.coverage
        report_line(11, "gen-dataset, 4 solvers, training and deploy bit-reproducible")
