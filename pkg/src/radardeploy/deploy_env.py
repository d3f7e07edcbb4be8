"""Sequential-deployment environment over the training grid, with the
constraint-violation penalty and exponential reward transform.

One episode places the radars one at a time.  Actions are points in the
unit square, mapped affinely onto the deploy rectangle, projected to its
upper/right boundary and snapped to the integer lattice.  The raw reward
after each placement is the covered fraction of the environment grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detection import Heatmap, PhysicsParams, compute_heatmap, coverage
from .geometry import (
    N_RADARS,
    BoundaryParam,
    Deployment,
    GridSpec,
    RegionSpec,
    Scenario,
)


class EpisodeDoneError(RuntimeError):
    """Raised when stepping a terminal episode state."""


@dataclass(frozen=True)
class EnvState:
    """Immutable per-step snapshot of an episode."""

    heatmap: Heatmap
    scenario: Scenario
    jammer_vec: np.ndarray  # (2|J|,) normalized coordinates
    history: np.ndarray  # (2|R|,) normalized, zero-padded
    one_hot: np.ndarray  # (|R|,); all-zero once terminal
    t: int
    prev_coverage: float
    radars: tuple[tuple[int, int], ...] = ()
    arclengths: tuple[float, ...] = ()  # meters along the boundary, per radar

    @property
    def done(self) -> bool:
        return self.t >= self.one_hot.size


@dataclass(frozen=True)
class Transition:
    state: EnvState
    action: np.ndarray
    shaped_reward: float
    next_state: EnvState
    terminal: bool


def augment_channel(heatmap: Heatmap, tau: float) -> Heatmap:
    """Indicator channel: 1 where the detection probability reaches tau."""
    return Heatmap(heatmap.grid, (heatmap.values >= tau).astype(float))


def cvdp_penalty(anchor: float, tolerance: float, arc: float, monotone: bool = False) -> float:
    """Constraint-violation penalty of a placement at normalized arclength
    ``arc`` against its anchor.

    The default piecewise form is intentionally discontinuous at both branch
    edges (the middle branch is the steeper one); ``monotone`` switches to a
    continuous nonincreasing variant with the same inner slope.
    """
    d = abs(anchor - arc)
    if d <= tolerance:
        return 0.0
    if monotone:
        if d <= 1.5 * tolerance:
            return -3.0 * (d - tolerance)
        return -1.5 * tolerance - (d - 1.5 * tolerance)
    if d <= 1.5 * tolerance:
        return tolerance - 3.0 * d
    return tolerance - d


def expr_reward(r_t: float, r_prev: float) -> float:
    """Exponential coverage-gain transform: (10^r_t - 10^r_prev) / 10."""
    return (10.0**r_t - 10.0**r_prev) / 10.0


def shaped_reward(expr: float, penalty: float) -> float:
    return expr + penalty


@dataclass(frozen=True)
class RewardShaper:
    """Anchors and tolerance bands (normalized arclengths) for the penalty."""

    anchors: tuple[float, ...]
    tolerances: tuple[float, ...]
    monotone: bool = False

    def __post_init__(self) -> None:
        if len(self.anchors) != len(self.tolerances):
            raise ValueError("anchors and tolerances must pair up")
        if any(not 0.0 <= a <= 1.0 for a in self.anchors):
            raise ValueError("anchors must be normalized to [0, 1]")
        if any(a >= b for a, b in zip(self.anchors, self.anchors[1:])):
            raise ValueError("anchors must be strictly increasing")
        if any(u <= 0.0 for u in self.tolerances):
            raise ValueError("tolerances must be positive")

    @classmethod
    def uniform(cls, n_radars: int = N_RADARS, monotone: bool = False) -> "RewardShaper":
        """Evenly spaced anchors with half-segment tolerance bands."""
        anchors = tuple((t + 0.5) / n_radars for t in range(n_radars))
        tolerances = tuple(1.0 / (2.0 * n_radars) for _ in range(n_radars))
        return cls(anchors, tolerances, monotone)

    def penalty(self, t: int, arc_norm: float) -> float:
        return cvdp_penalty(self.anchors[t], self.tolerances[t], arc_norm, self.monotone)

    def shape(self, t: int, raw: float, prev_raw: float, arc_norm: float) -> float:
        return shaped_reward(expr_reward(raw, prev_raw), self.penalty(t, arc_norm))


class DeployEnv:
    """Deterministic sequential placement MDP bound to one grid preset."""

    def __init__(
        self,
        params: PhysicsParams,
        region: RegionSpec,
        grid: GridSpec,
        n_radars: int = N_RADARS,
    ):
        self.params = params
        self.region = region
        self.grid = grid
        self.n_radars = n_radars
        self.boundary = BoundaryParam.from_region(region)

    def reset(self, scenario: Scenario) -> EnvState:
        one_hot = np.zeros(self.n_radars)
        one_hot[0] = 1.0
        return EnvState(
            heatmap=Heatmap(self.grid, np.zeros((self.grid.ny, self.grid.nx))),
            scenario=scenario,
            jammer_vec=scenario.normalized(self.region),
            history=np.zeros(2 * self.n_radars),
            one_hot=one_hot,
            t=0,
            prev_coverage=0.0,
        )

    def action_to_radar(self, action: np.ndarray) -> tuple[tuple[int, int], float]:
        """Map a unit-square action to a snapped boundary radar and its
        arclength in meters."""
        a = np.clip(np.asarray(action, dtype=float), 0.0, 1.0)
        x = self.region.deploy_x[0] + a[0] * (self.region.deploy_x[1] - self.region.deploy_x[0])
        y = self.region.deploy_y[0] + a[1] * (self.region.deploy_y[1] - self.region.deploy_y[0])
        projected, _ = self.boundary.project((x, y))
        snapped = self.boundary.snap(projected)
        return snapped, self.boundary.arclength_of(snapped)

    def step(self, state: EnvState, action: np.ndarray) -> tuple[EnvState, float]:
        """Place the next radar; returns (next state, raw coverage reward)."""
        if state.done:
            raise EpisodeDoneError(f"episode already placed all {self.n_radars} radars")
        snapped, arc = self.action_to_radar(action)
        radars = state.radars + (snapped,)
        heatmap = compute_heatmap(self.params, Deployment(radars), state.scenario, self.grid)
        raw = coverage(heatmap, self.params.detect_threshold)
        t_next = state.t + 1
        history = state.history.copy()
        nx_, ny_ = self.region.normalize(snapped)
        history[2 * state.t] = nx_
        history[2 * state.t + 1] = ny_
        one_hot = np.zeros(self.n_radars)
        if t_next < self.n_radars:
            one_hot[t_next] = 1.0
        next_state = EnvState(
            heatmap=heatmap,
            scenario=state.scenario,
            jammer_vec=state.jammer_vec,
            history=history,
            one_hot=one_hot,
            t=t_next,
            prev_coverage=raw,
            radars=radars,
            arclengths=state.arclengths + (arc,),
        )
        return next_state, raw

    def arc_normalized(self, arc_m: float) -> float:
        return arc_m / self.boundary.total_length

    def anchor_deployment(self, shaper: RewardShaper) -> Deployment:
        """The static uniform-anchor placement used as a baseline."""
        total = self.boundary.total_length
        return Deployment(
            tuple(
                self.boundary.snap(self.boundary.point_at(a * total))
                for a in shaper.anchors
            )
        )


def write_episode_trace(path: str, rows: list[dict]) -> None:
    """Debug CSV: one placement per line."""
    header = "t,action_x,action_y,radar_x,radar_y,raw_reward,shaped_reward"
    lines = [header]
    for r in rows:
        lines.append(
            f"{r['t']},{r['action'][0]:.6f},{r['action'][1]:.6f},"
            f"{r['radar'][0]},{r['radar'][1]},{r['raw']:.6f},{r['shaped']:.6f}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
