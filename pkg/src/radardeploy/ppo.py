"""Clipped-surrogate policy-gradient training over the deployment MDP.

Each episode is one batch: collect the T placements, compute advantages
once (frozen across epochs), then run several epochs of the clipped
surrogate with the full episode re-unrolled through the recurrent encoder
so gradients flow through time.  The encoder, actor and critic keep their
own Adam learning rates within a single shared optimizer step.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .deploy_env import DeployEnv, RewardShaper
from .detection import PhysicsParams, compute_heatmap, coverage
from .geometry import (
    Deployment,
    GridSpec,
    RegionSpec,
    Scenario,
    make_grid,
    sample_scenario_rng,
)
from .nnet import AdamState, adam_step, sigmoid
from .policy import (
    EMBED_SIZE,
    PolicyNetwork,
    assemble_input,
    gaussian_entropy,
    gaussian_log_prob,
    save_checkpoint,
)


@dataclass(frozen=True)
class PPOConfig:
    clip: float = 0.2
    lr_encoder: float = 1e-4
    lr_actor: float = 1e-4
    lr_critic: float = 5e-4
    episodes: int = 2000
    epochs: int = 10  # update passes over the episode batch
    gamma: float = 1.0
    gae_lambda: float = 0.95
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    checkpoint_interval: int = 500

    def __post_init__(self) -> None:
        if not 0.0 < self.clip < 1.0:
            raise ValueError("clip must lie in (0, 1)")
        for name in ("lr_encoder", "lr_actor", "lr_critic"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must lie in [0, 1]")

    def lr_for(self, name: str) -> float:
        if name.startswith("actor."):
            return self.lr_actor
        if name.startswith("critic."):
            return self.lr_critic
        return self.lr_encoder


@dataclass
class RolloutBuffer:
    """One episode of transitions plus everything needed to re-evaluate them."""

    jammer_vec: np.ndarray
    heatmaps: list[np.ndarray] = field(default_factory=list)
    augmented: list[np.ndarray] = field(default_factory=list)
    histories: list[np.ndarray] = field(default_factory=list)
    one_hots: list[np.ndarray] = field(default_factory=list)
    rec_h: list[np.ndarray] = field(default_factory=list)  # h_{t-1} inputs
    rec_c: list[np.ndarray] = field(default_factory=list)
    actions: list[np.ndarray] = field(default_factory=list)
    log_probs: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)  # shaped
    raw_rewards: list[float] = field(default_factory=list)
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.actions)


def collect_episode(
    env: DeployEnv,
    policy: PolicyNetwork,
    scenario: Scenario,
    shaper: RewardShaper,
    rng: np.random.Generator,
) -> RolloutBuffer:
    """Roll one episode with stochastic actions and shaped rewards."""
    state = env.reset(scenario)
    h, c = policy.zero_state()
    tau = env.params.detect_threshold
    buf = RolloutBuffer(jammer_vec=state.jammer_vec)
    for t in range(env.n_radars):
        m = state.heatmap.values
        m_aug = (m >= tau).astype(float)
        buf.heatmaps.append(m)
        buf.augmented.append(m_aug)
        buf.histories.append(state.history)
        buf.one_hots.append(state.one_hot)
        buf.rec_h.append(h)
        buf.rec_c.append(c)
        embedding, h, c, _ = policy.encode_step(m, m_aug, h, c)
        xp = assemble_input(embedding, state.jammer_vec, state.history, state.one_hot)
        action, log_prob, value = policy.act(xp, rng=rng)
        next_state, raw = env.step(state, action)
        arc_norm = env.arc_normalized(next_state.arclengths[-1])
        buf.actions.append(action)
        buf.log_probs.append(log_prob)
        buf.values.append(value)
        buf.rewards.append(shaper.shape(t, raw, state.prev_coverage, arc_norm))
        buf.raw_rewards.append(raw)
        state = next_state
    return buf


def compute_gae(
    rewards: np.ndarray, values: np.ndarray, gamma: float, lam: float
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation with a zero terminal bootstrap."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    n = rewards.size
    advantages = np.zeros(n)
    carry = 0.0
    for t in range(n - 1, -1, -1):
        v_next = values[t + 1] if t + 1 < n else 0.0
        delta = rewards[t] + gamma * v_next - values[t]
        carry = delta + gamma * lam * carry
        advantages[t] = carry
    return advantages, advantages + values


def finalize_buffer(buf: RolloutBuffer, config: PPOConfig) -> None:
    """Compute advantages/returns once; they stay frozen across epochs."""
    buf.advantages, buf.returns = compute_gae(
        np.array(buf.rewards), np.array(buf.values), config.gamma, config.gae_lambda
    )


def _unroll(policy: PolicyNetwork, buf: RolloutBuffer) -> list[dict]:
    """Forward the whole episode with current weights, keeping caches."""
    h, c = policy.zero_state()
    steps = []
    for t in range(len(buf)):
        embedding, h, c, enc_cache = policy.encode_step(
            buf.heatmaps[t], buf.augmented[t], h, c
        )
        xp = assemble_input(embedding, buf.jammer_vec, buf.histories[t], buf.one_hots[t])
        mu, raw_sigma, value, head_cache = policy.heads(xp)
        sigma = policy.sigma_of(raw_sigma)
        steps.append(
            {
                "mu": mu,
                "raw_sigma": raw_sigma,
                "sigma": sigma,
                "value": value,
                "log_prob": gaussian_log_prob(buf.actions[t], mu, sigma),
                "enc_cache": enc_cache,
                "head_cache": head_cache,
                "h": h,
                "c": c,
            }
        )
    return steps


def clipped_surrogate(ratio: float, adv: float, clip: float) -> tuple[float, bool]:
    """Per-step surrogate min(ratio*A, clip(ratio)*A).

    Returns (value, pass_through): gradient flows to the ratio exactly when
    the unclipped branch is active (ties included, matching min()).
    """
    clipped = min(max(ratio, 1.0 - clip), 1.0 + clip)
    unclipped_val = ratio * adv
    clipped_val = clipped * adv
    return min(unclipped_val, clipped_val), unclipped_val <= clipped_val


def ppo_update(
    policy: PolicyNetwork,
    buf: RolloutBuffer,
    opt_state: AdamState,
    config: PPOConfig,
) -> dict:
    """Clipped-surrogate epochs over the single-episode batch."""
    if buf.advantages is None or buf.returns is None:
        raise ValueError("finalize_buffer must run before ppo_update")
    n = len(buf)
    stats: dict[str, list[float]] = {"actor_loss": [], "value_loss": [], "entropy": []}
    for _ in range(config.epochs):
        steps = _unroll(policy, buf)
        grads = policy.zero_grads()
        dh = np.zeros(EMBED_SIZE)
        dc = np.zeros(EMBED_SIZE)
        actor_loss = 0.0
        value_loss = 0.0
        entropy_total = 0.0
        for t in range(n - 1, -1, -1):
            step = steps[t]
            adv = float(buf.advantages[t])
            ret = float(buf.returns[t])
            mu, sigma = step["mu"], step["sigma"]
            ratio = math.exp(step["log_prob"] - buf.log_probs[t])
            surrogate, pass_through = clipped_surrogate(ratio, adv, config.clip)
            actor_loss -= surrogate / n
            d_log_prob = -(adv * ratio) / n if pass_through else 0.0
            err = step["value"] - ret
            value_loss += config.value_coef * err * err / n
            entropy_total += gaussian_entropy(sigma) / n
            z = (buf.actions[t] - mu) / sigma
            d_mu = d_log_prob * (z / sigma)
            d_sigma = d_log_prob * ((z * z - 1.0) / sigma)
            d_sigma -= config.entropy_coef / (n * sigma)
            d_raw_sigma = d_sigma * sigmoid(step["raw_sigma"])  # softplus'
            d_value = 2.0 * config.value_coef * err / n
            d_xp = policy.heads_backward(d_mu, d_raw_sigma, d_value, step["head_cache"], grads)
            dh, dc = policy.encode_backward(d_xp[:EMBED_SIZE], dh, dc, step["enc_cache"], grads)
        total = actor_loss + value_loss - config.entropy_coef * entropy_total
        if not math.isfinite(total):
            raise RuntimeError(
                f"non-finite loss (actor={actor_loss}, value={value_loss}, "
                f"entropy={entropy_total}); aborting update"
            )
        adam_step(policy.params, grads, opt_state, config.lr_for)
        stats["actor_loss"].append(actor_loss)
        stats["value_loss"].append(value_loss)
        stats["entropy"].append(entropy_total)
    return stats


@dataclass
class TrainResult:
    policy: PolicyNetwork
    opt_state: AdamState
    curve: list[tuple[int, float, float]]  # (episode, raw coverage, shaped return)
    checkpoint_path: str | None


def curve_to_csv(curve: list[tuple[int, float, float]]) -> str:
    lines = ["episode,raw_coverage,shaped_return"]
    for episode, raw, shaped in curve:
        lines.append(f"{episode},{raw:.6f},{shaped:.6f}")
    return "\n".join(lines) + "\n"


def train(
    config: PPOConfig,
    phys: PhysicsParams,
    region: RegionSpec,
    grid: GridSpec,
    seed: int,
    checkpoint_path: str | None = None,
    curve_path: str | None = None,
    shaper: RewardShaper | None = None,
    n_jammers: int = 3,
    n_radars: int = 4,
    log_every: int = 0,
) -> TrainResult:
    """Run the episode/update loop; periodic checkpoints are atomic."""
    rng = np.random.default_rng(seed)
    policy = PolicyNetwork.initialized(grid, rng, n_jammers=n_jammers, n_radars=n_radars)
    opt_state = AdamState()
    env = DeployEnv(phys, region, grid, n_radars=n_radars)
    if shaper is None:
        shaper = RewardShaper.uniform(n_radars)
    curve: list[tuple[int, float, float]] = []
    for episode in range(1, config.episodes + 1):
        scenario = sample_scenario_rng(rng, region, n_jammers)
        buf = collect_episode(env, policy, scenario, shaper, rng)
        finalize_buffer(buf, config)
        ppo_update(policy, buf, opt_state, config)
        curve.append((episode, buf.raw_rewards[-1], float(sum(buf.rewards))))
        if log_every and episode % log_every == 0:
            recent = np.mean([row[1] for row in curve[-log_every:]])
            print(f"episode {episode}: recent mean coverage {recent:.4f}", flush=True)
        if checkpoint_path and episode % config.checkpoint_interval == 0:
            save_checkpoint(checkpoint_path, policy.params, opt_state)
    if checkpoint_path:
        save_checkpoint(checkpoint_path, policy.params, opt_state)
    if curve_path:
        with open(curve_path, "w", encoding="utf-8") as fh:
            fh.write(curve_to_csv(curve))
    return TrainResult(policy, opt_state, curve, checkpoint_path)


@dataclass
class DeployResult:
    deployment: Deployment
    coverage: float
    wall_time: float
    trace: list[dict]


def deploy(
    policy: PolicyNetwork,
    phys: PhysicsParams,
    region: RegionSpec,
    scenario: Scenario,
    env_grid: GridSpec | None = None,
    eval_grid: GridSpec | None = None,
    shaper: RewardShaper | None = None,
) -> DeployResult:
    """One deterministic (mean-action) episode.

    The timed section covers the policy passes and environment updates; the
    final full-grid evaluation runs outside the timer.
    """
    if env_grid is None:
        env_grid = policy.grid
    if eval_grid is None:
        eval_grid = make_grid(region, "full")
    if shaper is None:
        shaper = RewardShaper.uniform(policy.n_radars)
    env = DeployEnv(phys, region, env_grid, n_radars=policy.n_radars)
    tau = phys.detect_threshold
    start = time.perf_counter()
    state = env.reset(scenario)
    h, c = policy.zero_state()
    trace: list[dict] = []
    for t in range(env.n_radars):
        m = state.heatmap.values
        embedding, h, c, _ = policy.encode_step(m, (m >= tau).astype(float), h, c)
        xp = assemble_input(embedding, state.jammer_vec, state.history, state.one_hot)
        action, _, _ = policy.act(xp, deterministic=True)
        next_state, raw = env.step(state, action)
        arc_norm = env.arc_normalized(next_state.arclengths[-1])
        trace.append(
            {
                "t": t,
                "action": np.clip(action, 0.0, 1.0),
                "radar": next_state.radars[-1],
                "raw": raw,
                "shaped": shaper.shape(t, raw, state.prev_coverage, arc_norm),
            }
        )
        state = next_state
    wall_time = time.perf_counter() - start
    deployment = Deployment(state.radars)
    final = coverage(compute_heatmap(phys, deployment, scenario, eval_grid), tau)
    return DeployResult(deployment, final, wall_time, trace)
