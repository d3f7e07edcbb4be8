"""Anti-jamming radar deployment toolkit.

Detection-probability heatmaps under directional jamming, evolutionary
placement baselines (GA/PSO, 2-D region and 1-D boundary variants), and a
policy-gradient-trained sequential deployment policy, plus a benchmark
harness, a FastAPI service, and a CLI.
"""

__version__ = "0.1.0"

from .geometry import (
    BoundaryParam,
    Deployment,
    GridSpec,
    RegionSpec,
    Scenario,
    make_grid,
    sample_scenario,
)
from .detection import Heatmap, PhysicsParams, compute_heatmap, coverage

__all__ = [
    "BoundaryParam",
    "Deployment",
    "GridSpec",
    "Heatmap",
    "PhysicsParams",
    "RegionSpec",
    "Scenario",
    "compute_heatmap",
    "coverage",
    "make_grid",
    "sample_scenario",
    "__version__",
]
