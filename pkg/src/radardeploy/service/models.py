"""Pydantic request/response models for the service endpoints."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, field_validator

GridName = Literal["full", "training", "toy"]
MethodName = Literal["ga", "pso", "ga1d", "pso1d", "farda"]

IntPoint = tuple[int, int]


class ScenarioModel(BaseModel):
    jammers: list[IntPoint] = Field(min_length=1, max_length=16)


class SampleRequest(BaseModel):
    count: int = Field(default=1, ge=1, le=10000)
    seed: int = 0


class SampleResponse(BaseModel):
    scenarios: list[ScenarioModel]


class HeatmapRequest(BaseModel):
    scenario: ScenarioModel
    radars: list[IntPoint] = Field(default_factory=list, max_length=16)
    grid: GridName = "training"


class HeatmapResponse(BaseModel):
    nx: int
    ny: int
    values: list[list[float]]  # row j holds grid row j (ascending y)
    coverage: float


class CoverageResponse(BaseModel):
    coverage: float


class GAConfigModel(BaseModel):
    population: int = Field(default=50, ge=2)
    iterations: int = Field(default=100, ge=1)
    crossover_prob: float = Field(default=0.9, ge=0.0, le=1.0)
    mutation_prob: float = Field(default=0.1, ge=0.0, le=1.0)

    @field_validator("population")
    @classmethod
    def _even(cls, v: int) -> int:
        if v % 2 != 0:
            raise ValueError("population must be even")
        return v


class PSOConfigModel(BaseModel):
    swarm: int = Field(default=20, ge=1)
    iterations: int = Field(default=100, ge=1)
    inertia: float = Field(default=1.0, ge=0.0)
    accel_local: float = Field(default=2.0, ge=0.0)
    accel_global: float = Field(default=2.0, ge=0.0)


class SolveRequest(BaseModel):
    method: MethodName
    scenario: ScenarioModel
    seed: int = 0
    fitness_grid: GridName = "training"
    ga: GAConfigModel = Field(default_factory=GAConfigModel)
    pso: PSOConfigModel = Field(default_factory=PSOConfigModel)
    checkpoint: str | None = None  # server-local path, required for farda


class SolveResponse(BaseModel):
    method: MethodName
    radars: list[IntPoint]
    coverage: float  # always scored on the full grid
    wall_time_seconds: float
    efficiency: float


class TrainRequest(BaseModel):
    episodes: int = Field(default=100, ge=1, le=200000)
    seed: int = 0
    grid: GridName = "toy"
    checkpoint_out: str
    epochs: int = Field(default=10, ge=1)
    checkpoint_interval: int = Field(default=500, ge=1)


class TrainResponse(BaseModel):
    checkpoint: str
    episodes: int
    final_coverage_mean: float  # mean raw coverage over the last 100 episodes
    curve_tail: list[tuple[int, float, float]]


class EfficiencyRequest(BaseModel):
    coverage: float = Field(ge=0.0, le=1.0)
    time_seconds: float = Field(gt=0.0)


class EfficiencyResponse(BaseModel):
    efficiency: float


class CategorizeRequest(BaseModel):
    ga1d_coverage: float = Field(ge=0.0, le=1.0)
    pso1d_coverage: float = Field(ge=0.0, le=1.0)


class CategorizeResponse(BaseModel):
    category: Literal["Bad", "Normal", "Good"]


class RecordModel(BaseModel):
    scenario_id: int
    method: str
    coverage: float = Field(ge=0.0, le=1.0)
    wall_time: float = Field(gt=0.0)
    radars: list[IntPoint]


class ReportRequest(BaseModel):
    records: list[RecordModel] = Field(min_length=1)
    reference_method: str = "ga1d"


class ReportResponse(BaseModel):
    per_method: dict[str, dict[str, float]]
    category_counts: dict[str, int]
    per_category: dict[str, dict[str, float]]
    improvement: dict[str, dict[str, float]]
    text: str


class ExportRequest(BaseModel):
    scenario: ScenarioModel
    radars: list[IntPoint] = Field(default_factory=list, max_length=16)
    grid: GridName = "training"
    format: Literal["csv", "pgm"] = "csv"


class HealthResponse(BaseModel):
    status: str
    version: str
