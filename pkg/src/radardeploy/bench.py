"""Benchmark harness: dataset generation, solver execution, metrics,
categorization, report aggregation and heatmap export.

Solvers optimize on a configurable (default: training) grid for speed, but
every reported coverage is re-evaluated on the full 100 m grid, so records
are directly comparable across methods with different internal grids.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .detection import PhysicsParams, compute_heatmap, coverage, write_heatmap
from .evolve import (
    GAConfig,
    PSOConfig,
    boundary_domain,
    ga_solve,
    pso_solve,
    region_domain,
)
from .geometry import (
    BoundaryParam,
    Deployment,
    GridSpec,
    RegionSpec,
    Scenario,
    load_dataset,
    make_grid,
)
from .policy import PolicyNetwork, load_checkpoint
from .ppo import deploy

METHODS = ("ga", "pso", "ga1d", "pso1d", "farda")
CATEGORIES = ("Bad", "Normal", "Good")


def efficiency(cov: float, time_s: float) -> float:
    """Coverage per log-unit of time: coverage / ln(1 + seconds)."""
    if time_s <= 0:
        raise ValueError(f"time must be positive, got {time_s}")
    return cov / math.log1p(time_s)


def categorize(ga1d_coverage: float, pso1d_coverage: float) -> str:
    """Scenario difficulty from the two boundary-solver coverages:
    Bad when both fall below 0.9, Good when both reach 0.95, else Normal."""
    if ga1d_coverage < 0.9 and pso1d_coverage < 0.9:
        return "Bad"
    if ga1d_coverage >= 0.95 and pso1d_coverage >= 0.95:
        return "Good"
    return "Normal"


@dataclass
class BenchRecord:
    scenario_id: int
    method: str
    coverage: float
    wall_time: float
    radars: tuple[tuple[int, int], ...]

    def efficiency(self) -> float:
        return efficiency(self.coverage, self.wall_time)


RECORD_HEADER = "id,method,coverage,wall_time_seconds," + ",".join(
    f"r{i}x,r{i}y" for i in range(1, 5)
)


def records_to_csv(records: list[BenchRecord]) -> str:
    lines = [RECORD_HEADER]
    for r in records:
        coords = ",".join(f"{x},{y}" for x, y in r.radars)
        lines.append(f"{r.scenario_id},{r.method},{r.coverage:.12f},{r.wall_time:.6f},{coords}")
    return "\n".join(lines) + "\n"


def write_records_csv(path: str, records: list[BenchRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(records_to_csv(records))


def read_records_csv(path: str) -> list[BenchRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    for line in lines[1:]:
        parts = line.split(",")
        radars = tuple(
            (int(parts[4 + 2 * i]), int(parts[5 + 2 * i])) for i in range(4)
        )
        records.append(
            BenchRecord(int(parts[0]), parts[1], float(parts[2]), float(parts[3]), radars)
        )
    return records


@dataclass
class SolverSettings:
    """Everything run_bench needs beyond the dataset itself."""

    phys: PhysicsParams = field(default_factory=PhysicsParams)
    region: RegionSpec = field(default_factory=RegionSpec)
    ga: GAConfig = field(default_factory=GAConfig)
    pso: PSOConfig = field(default_factory=PSOConfig)
    fitness_grid: str = "training"
    checkpoint: str | None = None
    env_grid: str = "training"


def _coverage_fitness(phys, scenario, grid, domain):
    tau = phys.detect_threshold

    def fitness(x: np.ndarray) -> float:
        dep = domain.decode(x)
        return coverage(compute_heatmap(phys, dep, scenario, grid), tau)

    return fitness


def solve_scenario(
    method: str,
    scenario: Scenario,
    seed: int,
    settings: SolverSettings,
    policy: PolicyNetwork | None = None,
) -> tuple[Deployment, float]:
    """Run one solver on one scenario; returns (deployment, solve seconds).

    Wall time covers only the solve itself, not the final full-grid scoring.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    region = settings.region
    if method == "farda":
        if policy is None:
            raise ValueError("method farda requires a loaded policy")
        env_grid = make_grid(region, settings.env_grid)
        result = deploy(policy, settings.phys, region, scenario, env_grid=env_grid)
        return result.deployment, result.wall_time
    fit_grid = make_grid(region, settings.fitness_grid)
    if method in ("ga1d", "pso1d"):
        domain = boundary_domain(BoundaryParam.from_region(region))
    else:
        domain = region_domain(region)
    fitness = _coverage_fitness(settings.phys, scenario, fit_grid, domain)
    if method in ("ga", "ga1d"):
        res = ga_solve(settings.ga, fitness, domain, seed)
    else:
        res = pso_solve(settings.pso, fitness, domain, seed)
    return domain.decode(res.best_position), res.wall_time


def run_bench(
    dataset_path: str,
    method: str,
    seed: int,
    settings: SolverSettings | None = None,
    progress: bool = False,
) -> tuple[list[BenchRecord], list[tuple[int, str]]]:
    """Benchmark one method over a scenario file.

    Per-scenario solver seeds derive as seed XOR scenario id.  Coverage is
    always scored on the full grid.  Malformed dataset lines are skipped and
    returned so callers can surface a nonzero exit status.
    """
    if settings is None:
        settings = SolverSettings()
    scenario_rows, bad_lines = load_dataset(dataset_path)
    for lineno, message in bad_lines:
        print(f"warning: skipping dataset line {lineno}: {message}", file=sys.stderr)
    policy = None
    if method == "farda":
        if settings.checkpoint is None:
            raise ValueError("method farda requires a checkpoint path")
        params, _ = load_checkpoint(settings.checkpoint)
        policy = PolicyNetwork(make_grid(settings.region, settings.env_grid), params)
    full_grid = make_grid(settings.region, "full")
    tau = settings.phys.detect_threshold
    records = []
    for scenario_id, scenario in scenario_rows:
        deployment, wall = solve_scenario(
            method, scenario, seed ^ scenario_id, settings, policy
        )
        cov = coverage(compute_heatmap(settings.phys, deployment, scenario, full_grid), tau)
        records.append(BenchRecord(scenario_id, method, cov, wall, deployment.radars))
        if progress:
            print(
                f"scenario {scenario_id}: {method} coverage {cov:.4f} in {wall:.2f}s",
                file=sys.stderr,
                flush=True,
            )
    return records, bad_lines


@dataclass
class MetricsReport:
    per_method: dict[str, dict[str, float]]
    category_counts: dict[str, int]
    per_category: dict[str, dict[str, float]]  # category -> method -> mean coverage
    improvement: dict[str, dict[str, float]]  # method -> category -> % vs reference
    reference: str

    def to_text(self) -> str:
        lines = ["== per-method means =="]
        for method, stats in self.per_method.items():
            lines.append(
                f"{method:>6}: coverage {stats['coverage']:.4f}  "
                f"time {stats['time']:.2f}s  efficiency {stats['efficiency']:.2f}  "
                f"(n={int(stats['count'])})"
            )
        if self.category_counts:
            lines.append("== categories (by boundary-solver coverage) ==")
            counts = "  ".join(f"{c}: {self.category_counts.get(c, 0)}" for c in CATEGORIES)
            lines.append(counts)
            for cat in CATEGORIES:
                if cat not in self.per_category:
                    continue
                per = "  ".join(
                    f"{m}={v:.4f}" for m, v in sorted(self.per_category[cat].items())
                )
                lines.append(f"{cat:>7}: {per}")
            lines.append(f"== improvement vs {self.reference} (%) ==")
            for method, per_cat in sorted(self.improvement.items()):
                per = "  ".join(f"{c}={v:+.2f}" for c, v in per_cat.items())
                lines.append(f"{method:>6}: {per}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["method,mean_coverage,mean_time_seconds,mean_efficiency,count"]
        for method, stats in self.per_method.items():
            lines.append(
                f"{method},{stats['coverage']:.6f},{stats['time']:.6f},"
                f"{stats['efficiency']:.6f},{int(stats['count'])}"
            )
        return "\n".join(lines) + "\n"


def report(records: list[BenchRecord], reference_method: str = "ga1d") -> MetricsReport:
    """Aggregate records into per-method and per-category means.

    Categories need both boundary solvers present; otherwise only the
    per-method block is filled.
    """
    if not records:
        raise ValueError("cannot report on an empty record set")
    by_method: dict[str, list[BenchRecord]] = {}
    for r in records:
        by_method.setdefault(r.method, []).append(r)
    per_method = {}
    for method, rows in sorted(by_method.items()):
        per_method[method] = {
            "coverage": float(np.mean([r.coverage for r in rows])),
            "time": float(np.mean([r.wall_time for r in rows])),
            "efficiency": float(np.mean([r.efficiency() for r in rows])),
            "count": float(len(rows)),
        }
    category_counts: dict[str, int] = {}
    per_category: dict[str, dict[str, float]] = {}
    improvement: dict[str, dict[str, float]] = {}
    if "ga1d" in by_method and "pso1d" in by_method:
        ga1d = {r.scenario_id: r.coverage for r in by_method["ga1d"]}
        pso1d = {r.scenario_id: r.coverage for r in by_method["pso1d"]}
        shared = sorted(set(ga1d) & set(pso1d))
        labels = {sid: categorize(ga1d[sid], pso1d[sid]) for sid in shared}
        for cat in CATEGORIES:
            ids = [sid for sid in shared if labels[sid] == cat]
            if not ids:
                continue
            category_counts[cat] = len(ids)
            per_category[cat] = {}
            for method, rows in by_method.items():
                covs = [r.coverage for r in rows if r.scenario_id in set(ids)]
                if covs:
                    per_category[cat][method] = float(np.mean(covs))
        if reference_method in by_method:
            for method in by_method:
                if method == reference_method:
                    continue
                improvement[method] = {}
                for cat, per in per_category.items():
                    if method in per and reference_method in per and per[reference_method] > 0:
                        gain = (per[method] - per[reference_method]) / per[reference_method]
                        improvement[method][cat] = 100.0 * gain
    return MetricsReport(per_method, category_counts, per_category, improvement, reference_method)


def export_heatmap(
    phys: PhysicsParams,
    scenario: Scenario,
    deployment: Deployment,
    grid: GridSpec,
    path: str,
) -> None:
    """Write the heatmap (CSV or graymap by extension) plus a sidecar text
    file listing radar and jammer coordinates."""
    hm = compute_heatmap(phys, deployment, scenario, grid)
    write_heatmap(path, hm)
    sidecar = path + ".txt"
    lines = ["radars:"]
    lines.extend(f"  {x} {y}" for x, y in deployment.radars)
    lines.append("jammers:")
    lines.extend(f"  {x} {y}" for x, y in scenario.jammers)
    lines.append(f"grid: x0={grid.x0} y0={grid.y0} dx={grid.dx} dy={grid.dy} nx={grid.nx} ny={grid.ny}")
    with open(sidecar, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
