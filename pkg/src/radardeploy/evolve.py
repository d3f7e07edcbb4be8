"""Genetic-algorithm and particle-swarm optimizers over box decision
domains, with decoders for the two radar-placement search spaces:
per-radar coordinates inside the deploy rectangle (2-D mode) or per-radar
arclengths along its boundary (1-D mode).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import (
    N_RADARS,
    BoundaryParam,
    Deployment,
    RegionSpec,
    round_half_away,
)

Fitness = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class GAConfig:
    population: int = 50
    iterations: int = 100
    crossover_prob: float = 0.9
    mutation_prob: float = 0.1

    def __post_init__(self) -> None:
        if self.population < 2 or self.population % 2 != 0:
            raise ValueError("population must be even and >= 2")
        for name in ("crossover_prob", "mutation_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class PSOConfig:
    swarm: int = 20
    iterations: int = 100
    inertia: float = 1.0
    accel_local: float = 2.0
    accel_global: float = 2.0

    def __post_init__(self) -> None:
        if self.swarm < 1:
            raise ValueError("swarm must hold at least one particle")
        for name in ("inertia", "accel_local", "accel_global"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass
class SolveResult:
    best_position: np.ndarray
    best_fitness: float
    history: list[float]
    wall_time: float


class DecisionDomain:
    """A box search space plus a decoder from vectors to deployments."""

    def __init__(
        self,
        lower: Sequence[float],
        upper: Sequence[float],
        decode: Callable[[np.ndarray], Deployment],
    ):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or (self.lower >= self.upper).any():
            raise ValueError("domain bounds must satisfy lower < upper per dimension")
        self._decode = decode

    @property
    def dimension(self) -> int:
        return self.lower.size

    def contains(self, x: np.ndarray) -> bool:
        return bool((self.lower <= x).all() and (x <= self.upper).all())

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)

    def decode(self, x: np.ndarray) -> Deployment:
        return self._decode(np.clip(x, self.lower, self.upper))


def region_domain(region: RegionSpec, n_radars: int = N_RADARS) -> DecisionDomain:
    """2-D mode: one (x, y) pair per radar inside the deploy rectangle."""
    lower = [region.deploy_x[0], region.deploy_y[0]] * n_radars
    upper = [region.deploy_x[1], region.deploy_y[1]] * n_radars

    def decode(x: np.ndarray) -> Deployment:
        return Deployment(
            tuple(
                (round_half_away(x[2 * i]), round_half_away(x[2 * i + 1]))
                for i in range(n_radars)
            )
        )

    return DecisionDomain(lower, upper, decode)


def boundary_domain(boundary: BoundaryParam, n_radars: int = N_RADARS) -> DecisionDomain:
    """1-D mode: one arclength per radar along the deploy boundary."""

    def decode(x: np.ndarray) -> Deployment:
        return Deployment(tuple(boundary.snap(boundary.point_at(float(s))) for s in x))

    return DecisionDomain([0.0] * n_radars, [boundary.total_length] * n_radars, decode)


def ga_crossover(
    x_i: np.ndarray, x_j: np.ndarray, k: float, domain: DecisionDomain
) -> tuple[np.ndarray, np.ndarray]:
    """Arithmetic crossover; if either child escapes the domain the operation
    fails and both parents come back unchanged."""
    child_i = k * x_i + (1.0 - k) * x_j
    child_j = k * x_j + (1.0 - k) * x_i
    if not (domain.contains(child_i) and domain.contains(child_j)):
        return x_i.copy(), x_j.copy()
    return child_i, child_j


def ga_mutate(
    x: np.ndarray, domain: DecisionDomain, mutation_prob: float, rng: np.random.Generator
) -> np.ndarray:
    """Whole-chromosome mutation: with probability mutation_prob the vector is
    replaced by a fresh uniform draw from the domain."""
    if rng.random() < mutation_prob:
        return domain.sample(rng)
    return x


def _select_index(fit: np.ndarray, rng: np.random.Generator) -> int:
    total = fit.sum()
    if total > 0.0:
        return int(rng.choice(fit.size, p=fit / total))
    return int(rng.integers(fit.size))  # all-zero fitness: uniform fallback


def ga_solve(
    config: GAConfig, fitness: Fitness, domain: DecisionDomain, seed: int
) -> SolveResult:
    """Fitness-proportional selection, arithmetic crossover, whole-chromosome
    mutation; the incumbent best survives each generation unchanged."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    pop = [domain.sample(rng) for _ in range(config.population)]
    fit = np.array([fitness(x) for x in pop])
    best_i = int(np.argmax(fit))
    best, best_fit = pop[best_i].copy(), float(fit[best_i])
    history: list[float] = []
    for _ in range(config.iterations):
        new_pop = [best.copy()]  # elitism keeps the incumbent reachable
        while len(new_pop) < config.population:
            xi = pop[_select_index(fit, rng)]
            xj = pop[_select_index(fit, rng)]
            if rng.random() < config.crossover_prob:
                k = float(rng.random())
                xi, xj = ga_crossover(xi, xj, k, domain)
            xi = ga_mutate(xi, domain, config.mutation_prob, rng)
            xj = ga_mutate(xj, domain, config.mutation_prob, rng)
            new_pop.append(xi.copy())
            if len(new_pop) < config.population:
                new_pop.append(xj.copy())
        pop = new_pop
        fit = np.array([fitness(x) for x in pop])
        gen_best = int(np.argmax(fit))
        if float(fit[gen_best]) > best_fit:
            best, best_fit = pop[gen_best].copy(), float(fit[gen_best])
        history.append(best_fit)
    return SolveResult(best, best_fit, history, time.perf_counter() - start)


def pso_step(
    positions: np.ndarray,
    velocities: np.ndarray,
    pbest: np.ndarray,
    gbest: np.ndarray,
    config: PSOConfig,
    domain: DecisionDomain,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """One swarm update; a move that would leave the domain is rejected whole
    (the particle keeps its position but adopts the new velocity)."""
    n = positions.shape[0]
    r1 = rng.random(n)[:, None]  # fresh scalar pair per particle per step
    r2 = rng.random(n)[:, None]
    velocities = (
        config.inertia * velocities
        + config.accel_local * r1 * (pbest - positions)
        + config.accel_global * r2 * (gbest - positions)
    )
    candidates = positions + velocities
    inside = np.array([domain.contains(c) for c in candidates])
    positions = np.where(inside[:, None], candidates, positions)
    return positions, velocities


def pso_solve(
    config: PSOConfig, fitness: Fitness, domain: DecisionDomain, seed: int
) -> SolveResult:
    """Particle swarm with zero initial velocities; personal/global bests move
    only on strict fitness improvement."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    positions = np.array([domain.sample(rng) for _ in range(config.swarm)])
    velocities = np.zeros_like(positions)
    fit = np.array([fitness(x) for x in positions])
    pbest = positions.copy()
    pbest_fit = fit.copy()
    g_i = int(np.argmax(fit))
    gbest, gbest_fit = positions[g_i].copy(), float(fit[g_i])
    history: list[float] = []
    for _ in range(config.iterations):
        positions, velocities = pso_step(
            positions, velocities, pbest, gbest, config, domain, rng
        )
        fit = np.array([fitness(x) for x in positions])
        improved = fit > pbest_fit
        pbest[improved] = positions[improved]
        pbest_fit[improved] = fit[improved]
        g_i = int(np.argmax(pbest_fit))
        if float(pbest_fit[g_i]) > gbest_fit:
            gbest, gbest_fit = pbest[g_i].copy(), float(pbest_fit[g_i])
        history.append(gbest_fit)
    return SolveResult(gbest, gbest_fit, history, time.perf_counter() - start)
