"""Sensor layouts, imaging grids, and distance computation.

Conventions: all coordinates in meters, z = 0 for generated geometry
(propagation stays fully 3-D). Grid points enumerate row-major with the
y index varying fastest: ``j = ix * ny + iy``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

LAYOUT_KINDS = ("circular", "linear", "right_angle", "custom")

# Consecutive-sensor spacing of generated layouts must be exact to this.
SPACING_TOL = 1e-9


@dataclass(frozen=True)
class Position:
    """A point in 3-D space (meters)."""

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        for v in (self.x, self.y, self.z):
            if not math.isfinite(v):
                raise ValueError(f"position coordinates must be finite, got {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def distance_to(self, other: "Position") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))


@dataclass(frozen=True)
class SensorLayout:
    """Ordered positions of the sensing channels.

    ``spacing`` and ``anchor`` record the generation recipe for the three
    generated kinds; they are None for custom layouts.
    """

    kind: str
    positions: tuple[Position, ...]
    spacing: float | None = None
    anchor: Position | None = None

    def __post_init__(self):
        if self.kind not in LAYOUT_KINDS:
            raise ValueError(f"unknown layout kind {self.kind!r}")
        if len(self.positions) < 1:
            raise ValueError("layout needs at least one sensor")
        coords = self.coords
        if len(self.positions) > 1:
            d2 = np.sum((coords[:, None, :] - coords[None, :, :]) ** 2, axis=2)
            np.fill_diagonal(d2, np.inf)
            if d2.min() <= 0.0:
                raise ValueError("two sensors coincide")

    @property
    def n_channels(self) -> int:
        return len(self.positions)

    @property
    def coords(self) -> np.ndarray:
        """(N, 3) float array of sensor coordinates."""
        return np.array([[p.x, p.y, p.z] for p in self.positions], dtype=float)


@dataclass(frozen=True)
class ImagingGrid:
    """Regular planar grid of J imaging points at z = 0."""

    extent: tuple[float, float, float, float]  # x_min, x_max, y_min, y_max
    spacing: float
    _coords: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x_min, x_max, y_min, y_max = self.extent
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")
        if x_min > x_max or y_min > y_max:
            raise ValueError("invalid grid extent")
        xs = x_min + self.spacing * np.arange(self._steps(x_min, x_max))
        ys = y_min + self.spacing * np.arange(self._steps(y_min, y_max))
        gx, gy = np.meshgrid(xs, ys, indexing="ij")  # row-major: y fastest
        coords = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
        coords.flags.writeable = False
        object.__setattr__(self, "_coords", coords)

    def _steps(self, lo: float, hi: float) -> int:
        return int(math.floor((hi - lo) / self.spacing + 1e-9)) + 1

    @property
    def nx(self) -> int:
        return self._steps(self.extent[0], self.extent[1])

    @property
    def ny(self) -> int:
        return self._steps(self.extent[2], self.extent[3])

    @property
    def n_points(self) -> int:
        return self.nx * self.ny

    @property
    def coords(self) -> np.ndarray:
        """(J, 3) float array; read-only."""
        return self._coords

    @property
    def points(self) -> list[Position]:
        return [Position(*row) for row in self._coords]

    def index_of(self, p: Position) -> int:
        """Index of the grid point nearest to ``p``."""
        d = np.sum((self._coords - p.as_array()) ** 2, axis=1)
        return int(np.argmin(d))


@dataclass(frozen=True)
class DistanceMatrix:
    """Sensor-to-grid distances with the singularity guard applied."""

    r: np.ndarray  # (N, J), meters
    r_min: float

    def __post_init__(self):
        if self.r.min() < self.r_min - 1e-15:
            raise ValueError("distance below the singularity guard")


def default_anchor(kind: str, extent: Sequence[float]) -> Position:
    """Anchor placement used by the experiment defaults.

    Circular layouts center on the field; linear runs along the field's
    horizontal midline; right-angle corners near the field origin so its
    arms follow the field edges.
    """
    x_min, x_max, y_min, y_max = extent
    if kind == "circular":
        return Position((x_min + x_max) / 2, (y_min + y_max) / 2)
    if kind == "linear":
        return Position(x_min + 0.5, (y_min + y_max) / 2)
    if kind == "right_angle":
        return Position(x_min + 0.5, y_min + 0.5)
    raise ValueError(f"no default anchor for layout kind {kind!r}")


def make_layout(kind: str, n_channels: int, spacing: float, anchor: Position) -> SensorLayout:
    """Generate a sensor layout.

    circular: ring centered at ``anchor``, radius ``n*spacing / 2*pi`` so the
    arc length between consecutive sensors equals ``spacing``.
    linear: sensors along +x starting at ``anchor``.
    right_angle: ceil(N/2) sensors along +x from the corner ``anchor`` (corner
    included once), the rest along +y.
    """
    if n_channels < 1:
        raise ValueError("n_channels must be >= 1")
    if spacing <= 0:
        raise ValueError("spacing must be positive")

    a = anchor
    if kind == "circular":
        radius = n_channels * spacing / (2 * math.pi)
        step = 2 * math.pi / n_channels
        pts = [
            Position(a.x + radius * math.cos(i * step), a.y + radius * math.sin(i * step), a.z)
            for i in range(n_channels)
        ]
    elif kind == "linear":
        pts = [Position(a.x + i * spacing, a.y, a.z) for i in range(n_channels)]
    elif kind == "right_angle":
        n_x = math.ceil(n_channels / 2)
        pts = [Position(a.x + i * spacing, a.y, a.z) for i in range(n_x)]
        pts += [Position(a.x, a.y + i * spacing, a.z) for i in range(1, n_channels - n_x + 1)]
    else:
        raise ValueError(f"cannot generate layout of kind {kind!r}")

    return SensorLayout(kind=kind, positions=tuple(pts), spacing=spacing, anchor=a)


def sample_source(rng: np.random.Generator, extent: Sequence[float]) -> Position:
    """Uniform source position over the rectangular field, z = 0."""
    x_min, x_max, y_min, y_max = extent
    if x_min > x_max or y_min > y_max:
        raise ValueError("invalid field extent")
    return Position(float(rng.uniform(x_min, x_max)), float(rng.uniform(y_min, y_max)), 0.0)


def distance_matrix(
    layout: SensorLayout, grid: ImagingGrid, r_min: float | None = None
) -> DistanceMatrix:
    """Euclidean sensor-to-grid distances, clamped below at ``r_min``.

    Default guard is half the grid spacing, which only perturbs the grid
    cell containing a sensor while keeping the propagation kernel finite.
    """
    if r_min is None:
        r_min = 0.5 * grid.spacing
    s = layout.coords
    g = grid.coords
    r = np.sqrt(np.sum((s[:, None, :] - g[None, :, :]) ** 2, axis=2))
    r = np.maximum(r, r_min)
    r.flags.writeable = False
    return DistanceMatrix(r=r, r_min=r_min)


def source_distances(layout: SensorLayout, source: Position) -> np.ndarray:
    """(N,) distances from each sensor to the source (unclamped)."""
    return np.linalg.norm(layout.coords - source.as_array()[None, :], axis=1)


# -- serialization ----------------------------------------------------------


def layout_to_config(layout: SensorLayout) -> dict:
    cfg: dict = {"kind": layout.kind, "n_channels": layout.n_channels}
    if layout.kind == "custom":
        cfg["positions"] = [[p.x, p.y, p.z] for p in layout.positions]
    else:
        cfg["spacing_m"] = layout.spacing
        cfg["anchor_xyz"] = [layout.anchor.x, layout.anchor.y, layout.anchor.z]
    return cfg


def layout_from_config(cfg: dict) -> SensorLayout:
    kind = cfg["kind"]
    if kind == "custom":
        pts = tuple(Position(*map(float, row)) for row in cfg["positions"])
        return SensorLayout(kind="custom", positions=pts)
    return make_layout(
        kind,
        int(cfg["n_channels"]),
        float(cfg["spacing_m"]),
        Position(*map(float, cfg["anchor_xyz"])),
    )


def grid_to_config(grid: ImagingGrid) -> dict:
    return {"extent": list(grid.extent), "grid_spacing_m": grid.spacing}


def grid_from_config(cfg: dict) -> ImagingGrid:
    return ImagingGrid(extent=tuple(map(float, cfg["extent"])), spacing=float(cfg["grid_spacing_m"]))


def save_geometry(path: str | Path, layout: SensorLayout | None = None, grid: ImagingGrid | None = None) -> None:
    doc = {}
    if layout is not None:
        doc["layout"] = layout_to_config(layout)
    if grid is not None:
        doc["grid"] = grid_to_config(grid)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_geometry(path: str | Path) -> tuple[SensorLayout | None, ImagingGrid | None]:
    doc = json.loads(Path(path).read_text())
    layout = layout_from_config(doc["layout"]) if "layout" in doc else None
    grid = grid_from_config(doc["grid"]) if "grid" in doc else None
    return layout, grid


def write_positions_csv(path: str | Path, positions: Iterable[Position]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "x", "y", "z"])
        for i, p in enumerate(positions):
            w.writerow([i, repr(float(p.x)), repr(float(p.y)), repr(float(p.z))])


def read_positions_csv(path: str | Path) -> list[Position]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(Position(float(row["x"]), float(row["y"]), float(row["z"])))
    return out
