"""Regions, grids, scenarios and the deployable boundary.

Coordinates are meters in a fixed frame: the surveillance rectangle spans
x in [30000, 50000] and y in [0, 120000].  Jammers live on the integer
lattice of the upper-right sub-rectangle, radars on the integer lattice of
the lower-left one (or on its upper/right boundary in 1-D mode).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

N_JAMMERS = 3
N_RADARS = 4

Coord = tuple[float, float]
IntCoord = tuple[int, int]


def round_half_away(x: float) -> int:
    """Round to the nearest integer, halves away from zero."""
    if x >= 0:
        return int(math.floor(x + 0.5))
    return int(math.ceil(x - 0.5))


def _contains(interval: tuple[float, float], sub: tuple[float, float]) -> bool:
    return interval[0] <= sub[0] and sub[1] <= interval[1]


@dataclass(frozen=True)
class RegionSpec:
    """Axis-aligned surveillance, jammer and radar-deployment rectangles."""

    surveil_x: tuple[float, float] = (3e4, 5e4)
    surveil_y: tuple[float, float] = (0.0, 1.2e5)
    jam_x: tuple[float, float] = (4e4, 5e4)
    jam_y: tuple[float, float] = (6e4, 1.2e5)
    deploy_x: tuple[float, float] = (3e4, 4e4)
    deploy_y: tuple[float, float] = (0.0, 6e4)

    def __post_init__(self) -> None:
        for name in ("surveil_x", "surveil_y", "jam_x", "jam_y", "deploy_x", "deploy_y"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be a nonempty interval, got ({lo}, {hi})")
        if not (_contains(self.surveil_x, self.jam_x) and _contains(self.surveil_y, self.jam_y)):
            raise ValueError("jam rectangle must lie inside the surveillance rectangle")
        if not (_contains(self.surveil_x, self.deploy_x) and _contains(self.surveil_y, self.deploy_y)):
            raise ValueError("deploy rectangle must lie inside the surveillance rectangle")
        # Closures may only touch; interiors must be disjoint.
        ox = min(self.jam_x[1], self.deploy_x[1]) - max(self.jam_x[0], self.deploy_x[0])
        oy = min(self.jam_y[1], self.deploy_y[1]) - max(self.jam_y[0], self.deploy_y[0])
        if ox > 0 and oy > 0:
            raise ValueError("jam and deploy rectangles must have disjoint interiors")

    def in_jam(self, p: Coord) -> bool:
        return self.jam_x[0] <= p[0] <= self.jam_x[1] and self.jam_y[0] <= p[1] <= self.jam_y[1]

    def in_deploy(self, p: Coord) -> bool:
        return (
            self.deploy_x[0] <= p[0] <= self.deploy_x[1]
            and self.deploy_y[0] <= p[1] <= self.deploy_y[1]
        )

    def normalize(self, p: Coord) -> tuple[float, float]:
        """Map a point to [0,1]^2 by the surveillance extents (network-facing)."""
        return (
            (p[0] - self.surveil_x[0]) / (self.surveil_x[1] - self.surveil_x[0]),
            (p[1] - self.surveil_y[0]) / (self.surveil_y[1] - self.surveil_y[0]),
        )


@dataclass(frozen=True)
class GridSpec:
    """Rectangular sample lattice: point(i, j) = (x0 + i*dx, y0 + j*dy)."""

    x0: float
    y0: float
    dx: float
    dy: float
    nx: int
    ny: int

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1 or self.dx <= 0 or self.dy <= 0:
            raise ValueError("grid must have positive spacing and at least one point per axis")

    @property
    def n_points(self) -> int:
        return self.nx * self.ny

    def point(self, i: int, j: int) -> Coord:
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise IndexError(f"grid index ({i}, {j}) out of range {self.nx}x{self.ny}")
        return (self.x0 + i * self.dx, self.y0 + j * self.dy)

    def xs(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    def ys(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) coordinate arrays of shape (ny, nx); cached, treat as read-only."""
        return _cached_mesh(self)


@functools.lru_cache(maxsize=16)
def _cached_mesh(grid: "GridSpec") -> tuple[np.ndarray, np.ndarray]:
    X, Y = np.meshgrid(grid.xs(), grid.ys())
    X.setflags(write=False)
    Y.setflags(write=False)
    return X, Y


GRID_MODES = ("full", "training", "toy")


def make_grid(region: RegionSpec, mode: str) -> GridSpec:
    """Build a named grid preset over the surveillance region.

    ``full``: 100 m spacing over the whole region (200 x 1200 points).
    ``training``: 500 m spacing over the upper half only (40 x 120 points).
    ``toy``: 12 x 20 points over the upper half, for desk-scale training runs.

    Sampling is lower-inclusive / upper-exclusive on both axes.
    """
    x0, x1 = region.surveil_x
    if mode == "full":
        y0, y1 = region.surveil_y
        dx = dy = 100.0
    elif mode == "training":
        y0, y1 = region.jam_y[0], region.surveil_y[1]
        dx = dy = 500.0
    elif mode == "toy":
        y0, y1 = region.jam_y[0], region.surveil_y[1]
        nx, ny = 12, 20
        return GridSpec(x0, y0, (x1 - x0) / nx, (y1 - y0) / ny, nx, ny)
    else:
        raise ValueError(f"unknown grid mode {mode!r}, expected one of {GRID_MODES}")
    nx = int(round((x1 - x0) / dx))
    ny = int(round((y1 - y0) / dy))
    return GridSpec(x0, y0, dx, dy, nx, ny)


@dataclass(frozen=True)
class Scenario:
    """A jamming-node combination: the problem instance."""

    jammers: tuple[IntCoord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "jammers", tuple((int(x), int(y)) for x, y in self.jammers)
        )

    def validate(self, region: RegionSpec) -> None:
        for p in self.jammers:
            if not region.in_jam(p):
                raise ValueError(f"jammer {p} outside the jam rectangle")

    def normalized(self, region: RegionSpec) -> np.ndarray:
        """Flat (2*|J|,) vector of coordinates scaled to [0,1]."""
        out = np.empty(2 * len(self.jammers))
        for i, p in enumerate(self.jammers):
            out[2 * i], out[2 * i + 1] = region.normalize(p)
        return out


@dataclass(frozen=True)
class Deployment:
    """An ordered radar combination (may be partial during an episode)."""

    radars: tuple[IntCoord, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "radars", tuple((int(x), int(y)) for x, y in self.radars)
        )


def sample_scenario_rng(
    rng: np.random.Generator, region: RegionSpec, n_jammers: int = N_JAMMERS
) -> Scenario:
    """Draw jammers uniformly from the jam rectangle's integer lattice."""
    xs = rng.integers(int(region.jam_x[0]), int(region.jam_x[1]), size=n_jammers, endpoint=True)
    ys = rng.integers(int(region.jam_y[0]), int(region.jam_y[1]), size=n_jammers, endpoint=True)
    return Scenario(tuple((int(x), int(y)) for x, y in zip(xs, ys)))


def sample_scenario(seed: int, region: RegionSpec, n_jammers: int = N_JAMMERS) -> Scenario:
    """Deterministic scenario draw for a given seed."""
    return sample_scenario_rng(np.random.default_rng(seed), region, n_jammers)


def sample_dataset(
    count: int, seed: int, region: RegionSpec, n_jammers: int = N_JAMMERS
) -> list[Scenario]:
    """Draw ``count`` scenarios from one seeded stream."""
    rng = np.random.default_rng(seed)
    return [sample_scenario_rng(rng, region, n_jammers) for _ in range(count)]


@dataclass(frozen=True)
class BoundaryParam:
    """Unit-speed arclength parameterization of the deploy rectangle's
    upper and right edges.

    Arclength 0 is the upper-left end of the upper edge; the corner sits at
    arclength ``upper_length``; the far end of the right edge closes the
    total length.
    """

    x_min: float = 3e4
    x_max: float = 4e4
    y_top: float = 6e4
    y_min: float = 0.0

    @classmethod
    def from_region(cls, region: RegionSpec) -> "BoundaryParam":
        return cls(
            x_min=region.deploy_x[0],
            x_max=region.deploy_x[1],
            y_top=region.deploy_y[1],
            y_min=region.deploy_y[0],
        )

    @property
    def corner(self) -> Coord:
        return (self.x_max, self.y_top)

    @property
    def upper_length(self) -> float:
        return self.x_max - self.x_min

    @property
    def right_length(self) -> float:
        return self.y_top - self.y_min

    @property
    def total_length(self) -> float:
        return self.upper_length + self.right_length

    def point_at(self, s: float) -> Coord:
        """Map arclength to a boundary point (continuous, piecewise linear)."""
        if not 0.0 <= s <= self.total_length:
            raise ValueError(f"arclength {s} outside [0, {self.total_length}]")
        if s <= self.upper_length:
            return (self.x_min + s, self.y_top)
        return (self.x_max, self.y_top - (s - self.upper_length))

    def arclength_of(self, p: Coord) -> float:
        """Arclength of a point assumed to lie on the boundary."""
        if p[1] == self.y_top and p[0] <= self.x_max:
            return p[0] - self.x_min
        return self.upper_length + (self.y_top - p[1])

    def project(self, p: Coord) -> tuple[Coord, float]:
        """Euclidean-nearest boundary point and its arclength.

        Ties between the two segments break toward smaller arclength.
        """
        px, py = float(p[0]), float(p[1])
        if not (math.isfinite(px) and math.isfinite(py)):
            raise ValueError(f"cannot project non-finite point {p}")
        qx = min(max(px, self.x_min), self.x_max)
        d_up = math.hypot(px - qx, py - self.y_top)
        qy = min(max(py, self.y_min), self.y_top)
        d_right = math.hypot(px - self.x_max, py - qy)
        if d_up <= d_right:
            return (qx, self.y_top), qx - self.x_min
        return (self.x_max, qy), self.upper_length + (self.y_top - qy)

    def snap(self, p: Coord) -> IntCoord:
        """Nearest integer-lattice boundary point; the free coordinate rounds
        half away from zero."""
        s = self.arclength_of(p)
        if s <= self.upper_length:
            return (round_half_away(p[0]), int(self.y_top))
        return (int(self.x_max), round_half_away(p[1]))


_DEFAULT_BOUNDARY = BoundaryParam()


def arclength_to_point(s: float, boundary: BoundaryParam = _DEFAULT_BOUNDARY) -> Coord:
    return boundary.point_at(s)


def project_to_boundary(
    p: Coord, boundary: BoundaryParam = _DEFAULT_BOUNDARY
) -> tuple[Coord, float]:
    return boundary.project(p)


def snap_to_lattice(p: Coord, boundary: BoundaryParam = _DEFAULT_BOUNDARY) -> IntCoord:
    return boundary.snap(p)


# --- scenario file format: one line per scenario, "id,jx1,jy1,jx2,jy2,jx3,jy3" ---


def scenarios_to_csv(scenarios: list[Scenario]) -> str:
    lines = []
    for i, sc in enumerate(scenarios):
        flat = ",".join(f"{c}" for p in sc.jammers for c in p)
        lines.append(f"{i},{flat}")
    return "\n".join(lines) + "\n"


def write_scenarios_csv(path: str, scenarios: list[Scenario]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(scenarios_to_csv(scenarios))


def parse_scenario_line(line: str, n_jammers: int = N_JAMMERS) -> tuple[int, Scenario]:
    parts = [p.strip() for p in line.strip().split(",")]
    if len(parts) != 1 + 2 * n_jammers:
        raise ValueError(f"expected {1 + 2 * n_jammers} fields, got {len(parts)}")
    vals = [int(p) for p in parts]
    jammers = tuple((vals[1 + 2 * i], vals[2 + 2 * i]) for i in range(n_jammers))
    return vals[0], Scenario(jammers)


def load_dataset(
    path: str, n_jammers: int = N_JAMMERS
) -> tuple[list[tuple[int, Scenario]], list[tuple[int, str]]]:
    """Parse a scenario CSV; returns (records, bad_lines).

    ``bad_lines`` holds (1-based line number, error message) for every line
    that failed to parse; parsing continues past them.
    """
    records: list[tuple[int, Scenario]] = []
    bad: list[tuple[int, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(parse_scenario_line(line, n_jammers))
            except ValueError as exc:
                bad.append((lineno, str(exc)))
    return records, bad
