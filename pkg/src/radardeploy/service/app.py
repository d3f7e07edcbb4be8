"""FastAPI application exposing the toolkit over HTTP.

Heatmap evaluation, solver runs and checkpoint inference are request/
response; solve requests handle one scenario each so clients can stream a
dataset through and aggregate records themselves.  Loaded checkpoints are
cached per (path, mtime).
"""

from __future__ import annotations

import os

import numpy as np
from fastapi import FastAPI, HTTPException, Response

from .. import __version__
from ..bench import BenchRecord, categorize, efficiency, report
from ..detection import (
    DegenerateGeometryError,
    PhysicsParams,
    compute_heatmap,
    coverage,
    render_heatmap_csv,
    render_heatmap_pgm,
)
from ..geometry import Deployment, RegionSpec, Scenario, make_grid, sample_dataset
from ..policy import PolicyNetwork, load_checkpoint
from ..ppo import PPOConfig, deploy, train
from ..evolve import GAConfig, PSOConfig
from ..bench import SolverSettings, solve_scenario
from . import models as m

PHYS = PhysicsParams()
REGION = RegionSpec()

_policy_cache: dict[tuple[str, float, str], PolicyNetwork] = {}


def _load_policy(checkpoint: str, grid_name: str) -> PolicyNetwork:
    if not os.path.exists(checkpoint):
        raise HTTPException(status_code=400, detail=f"checkpoint not found: {checkpoint}")
    key = (os.path.abspath(checkpoint), os.path.getmtime(checkpoint), grid_name)
    if key not in _policy_cache:
        params, _ = load_checkpoint(checkpoint)
        try:
            policy = PolicyNetwork(make_grid(REGION, grid_name), params)
        except ValueError as exc:
            raise HTTPException(
                status_code=400,
                detail=f"checkpoint does not fit the {grid_name} grid: {exc}",
            )
        _policy_cache.clear()  # keep at most one loaded model
        _policy_cache[key] = policy
    return _policy_cache[key]


def _scenario(model: m.ScenarioModel) -> Scenario:
    scenario = Scenario(tuple((x, y) for x, y in model.jammers))
    try:
        scenario.validate(REGION)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return scenario


def create_app() -> FastAPI:
    app = FastAPI(
        title="radardeploy",
        version=__version__,
        description="Anti-jamming radar deployment: heatmaps, solvers, "
        "policy inference and benchmarking.",
    )

    @app.get("/health", response_model=m.HealthResponse)
    def health() -> m.HealthResponse:
        return m.HealthResponse(status="ok", version=__version__)

    @app.post("/scenarios/sample", response_model=m.SampleResponse)
    def scenarios_sample(req: m.SampleRequest) -> m.SampleResponse:
        scenarios = sample_dataset(req.count, req.seed, REGION)
        return m.SampleResponse(
            scenarios=[m.ScenarioModel(jammers=list(sc.jammers)) for sc in scenarios]
        )

    @app.post("/heatmap", response_model=m.HeatmapResponse)
    def heatmap(req: m.HeatmapRequest) -> m.HeatmapResponse:
        scenario = _scenario(req.scenario)
        grid = make_grid(REGION, req.grid)
        try:
            hm = compute_heatmap(PHYS, Deployment(tuple(req.radars)), scenario, grid)
        except DegenerateGeometryError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return m.HeatmapResponse(
            nx=grid.nx,
            ny=grid.ny,
            values=[[float(v) for v in row] for row in hm.values],
            coverage=coverage(hm, PHYS.detect_threshold),
        )

    @app.post("/coverage", response_model=m.CoverageResponse)
    def coverage_endpoint(req: m.HeatmapRequest) -> m.CoverageResponse:
        scenario = _scenario(req.scenario)
        grid = make_grid(REGION, req.grid)
        hm = compute_heatmap(PHYS, Deployment(tuple(req.radars)), scenario, grid)
        return m.CoverageResponse(coverage=coverage(hm, PHYS.detect_threshold))

    @app.post("/heatmap/export")
    def heatmap_export(req: m.ExportRequest) -> Response:
        scenario = _scenario(req.scenario)
        grid = make_grid(REGION, req.grid)
        hm = compute_heatmap(PHYS, Deployment(tuple(req.radars)), scenario, grid)
        if req.format == "pgm":
            return Response(
                content=render_heatmap_pgm(hm), media_type="application/octet-stream"
            )
        return Response(content=render_heatmap_csv(hm), media_type="text/csv")

    @app.post("/solve", response_model=m.SolveResponse)
    def solve(req: m.SolveRequest) -> m.SolveResponse:
        scenario = _scenario(req.scenario)
        settings = SolverSettings(
            phys=PHYS,
            region=REGION,
            ga=GAConfig(**req.ga.model_dump()),
            pso=PSOConfig(**req.pso.model_dump()),
            fitness_grid=req.fitness_grid,
            checkpoint=req.checkpoint,
        )
        policy = None
        if req.method == "farda":
            if req.checkpoint is None:
                raise HTTPException(status_code=400, detail="method farda needs a checkpoint")
            policy = _load_policy(req.checkpoint, settings.env_grid)
        deployment, wall = solve_scenario(req.method, scenario, req.seed, settings, policy)
        full = make_grid(REGION, "full")
        cov = coverage(compute_heatmap(PHYS, deployment, scenario, full), PHYS.detect_threshold)
        return m.SolveResponse(
            method=req.method,
            radars=list(deployment.radars),
            coverage=cov,
            wall_time_seconds=wall,
            efficiency=efficiency(cov, wall) if wall > 0 else 0.0,
        )

    @app.post("/deploy", response_model=m.SolveResponse)
    def deploy_endpoint(req: m.SolveRequest) -> m.SolveResponse:
        if req.checkpoint is None:
            raise HTTPException(status_code=400, detail="deploy needs a checkpoint")
        scenario = _scenario(req.scenario)
        policy = _load_policy(req.checkpoint, "training")
        result = deploy(policy, PHYS, REGION, scenario)
        return m.SolveResponse(
            method="farda",
            radars=list(result.deployment.radars),
            coverage=result.coverage,
            wall_time_seconds=result.wall_time,
            efficiency=efficiency(result.coverage, result.wall_time),
        )

    @app.post("/train", response_model=m.TrainResponse)
    def train_endpoint(req: m.TrainRequest) -> m.TrainResponse:
        config = PPOConfig(
            episodes=req.episodes,
            epochs=req.epochs,
            checkpoint_interval=req.checkpoint_interval,
        )
        grid = make_grid(REGION, req.grid)
        result = train(
            config, PHYS, REGION, grid, req.seed, checkpoint_path=req.checkpoint_out
        )
        tail = result.curve[-100:]
        return m.TrainResponse(
            checkpoint=req.checkpoint_out,
            episodes=req.episodes,
            final_coverage_mean=float(np.mean([row[1] for row in tail])),
            curve_tail=tail,
        )

    @app.post("/metrics/efficiency", response_model=m.EfficiencyResponse)
    def efficiency_endpoint(req: m.EfficiencyRequest) -> m.EfficiencyResponse:
        return m.EfficiencyResponse(efficiency=efficiency(req.coverage, req.time_seconds))

    @app.post("/metrics/categorize", response_model=m.CategorizeResponse)
    def categorize_endpoint(req: m.CategorizeRequest) -> m.CategorizeResponse:
        return m.CategorizeResponse(
            category=categorize(req.ga1d_coverage, req.pso1d_coverage)
        )

    @app.post("/report", response_model=m.ReportResponse)
    def report_endpoint(req: m.ReportRequest) -> m.ReportResponse:
        records = [
            BenchRecord(r.scenario_id, r.method, r.coverage, r.wall_time, tuple(r.radars))
            for r in req.records
        ]
        rep = report(records, reference_method=req.reference_method)
        return m.ReportResponse(
            per_method=rep.per_method,
            category_counts=rep.category_counts,
            per_category=rep.per_category,
            improvement=rep.improvement,
            text=rep.to_text(),
        )

    return app


app = create_app()
