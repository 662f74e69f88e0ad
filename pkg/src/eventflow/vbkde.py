"""Variable-bandwidth kernel density surfaces.

Every georeferenced record becomes one quartic (biweight) kernel centred on
its representative point.  Coordinate records use the user's base bandwidth;
place records widen it by ``sqrt((area + alpha) / alpha)`` so that coarse
places spread the same unit of mass over a larger footprint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError, ResourceLimitError
from .geomodel import (
    GeoRecord,
    Place,
    PlanarPoint,
    Projection,
    place_area_m2,
    representative_latlon,
)

DEFAULT_ALPHA = 80.0
BANDWIDTH_FLOOR = 100.0
MAX_GRID_SIDE = 2048
DEFAULT_MAX_CELLS = MAX_GRID_SIDE * MAX_GRID_SIDE

_SQRT_INV_LN2 = math.sqrt(1.0 / math.log(2.0))


def base_bandwidth(points, floor: float = BANDWIDTH_FLOOR) -> float:
    """Two-dimensional rule-of-thumb bandwidth for a set of planar points.

    ``0.9 * min(SD, sqrt(1/ln 2) * Dm) * n**-0.2`` where SD is the standard
    distance and Dm the median distance to the mean centre, clamped below
    by ``floor``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        raise InvalidArgumentError("base bandwidth needs at least one point")
    offsets = pts - pts.mean(axis=0)
    dist = np.hypot(offsets[:, 0], offsets[:, 1])
    sd = math.sqrt(float(np.mean(dist * dist)))
    dm = float(np.median(dist))
    bw = 0.9 * min(sd, _SQRT_INV_LN2 * dm) * n ** -0.2
    return max(floor, bw)


def bandwidth_scale(area_m2: float, alpha: float = DEFAULT_ALPHA) -> float:
    if alpha <= 0:
        raise InvalidArgumentError("alpha must be positive")
    return math.sqrt((area_m2 + alpha) / alpha)


def georef_area(record: GeoRecord) -> float:
    """Area in m² of the record's place boundary; zero for coordinates."""
    if isinstance(record.georef, Place):
        return place_area_m2(record.georef)
    return 0.0


def record_bandwidth(record: GeoRecord, bw_s: float, alpha: float = DEFAULT_ALPHA) -> float:
    if bw_s <= 0:
        raise InvalidArgumentError("base bandwidth must be positive")
    return bandwidth_scale(georef_area(record), alpha) * bw_s


@dataclass(frozen=True)
class GridSpec:
    """Regular raster; ``origin`` is the lower-left corner, row 0 is southmost."""

    origin: PlanarPoint
    cell_size: float
    n_rows: int
    n_cols: int

    def __post_init__(self):
        if not (self.cell_size > 0 and math.isfinite(self.cell_size)):
            raise InvalidArgumentError("cell_size must be positive and finite")
        if self.n_rows < 1 or self.n_cols < 1:
            raise InvalidArgumentError("grid needs at least one row and column")
        object.__setattr__(self, "origin", PlanarPoint(*map(float, self.origin)))

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def cell_area(self) -> float:
        return self.cell_size * self.cell_size

    def col_centers(self) -> np.ndarray:
        return self.origin.x + (np.arange(self.n_cols) + 0.5) * self.cell_size

    def row_centers(self) -> np.ndarray:
        return self.origin.y + (np.arange(self.n_rows) + 0.5) * self.cell_size

    def cell_centers(self):
        """Meshgrid ``(X, Y)`` of cell centres, each shaped ``(n_rows, n_cols)``."""
        return np.meshgrid(self.col_centers(), self.row_centers())

    @classmethod
    def covering(cls, xmin, ymin, xmax, ymax, cell_size) -> "GridSpec":
        n_cols = max(1, int(math.ceil((xmax - xmin) / cell_size)))
        n_rows = max(1, int(math.ceil((ymax - ymin) / cell_size)))
        return cls(PlanarPoint(float(xmin), float(ymin)), float(cell_size), n_rows, n_cols)


@dataclass(frozen=True)
class KernelSet:
    """Kernel centres ``(x, y)``, bandwidths ``h`` and the per-kernel weight."""

    x: np.ndarray
    y: np.ndarray
    h: np.ndarray
    bw_s: float

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def weight(self) -> float:
        return 1.0 / self.n


def kernel_set(records: Sequence[GeoRecord], proj: Projection, alpha: float = DEFAULT_ALPHA,
               mode: str = "variable", floor: float = BANDWIDTH_FLOOR) -> KernelSet:
    """Centres and bandwidths of every georeferenced record.

    ``mode='fixed'`` gives every kernel the base bandwidth (places collapsed
    to their centroid); ``mode='variable'`` widens place kernels by area.
    """
    if mode not in ("variable", "fixed"):
        raise InvalidArgumentError(f"unknown bandwidth mode {mode!r}")
    usable = [r for r in records if r.georef is not None]
    if not usable:
        raise InvalidArgumentError("no record carries a usable georeference")
    latlon = np.array([representative_latlon(r.georef) for r in usable])
    x, y = proj.forward(latlon[:, 0], latlon[:, 1])
    bw_s = base_bandwidth(np.column_stack([x, y]), floor)
    if mode == "fixed":
        h = np.full(len(usable), bw_s)
    else:
        h = np.array([record_bandwidth(r, bw_s, alpha) for r in usable])
    return KernelSet(np.atleast_1d(x), np.atleast_1d(y), h, bw_s)


def auto_grid(kernels: KernelSet, max_side: int = MAX_GRID_SIDE) -> GridSpec:
    """Bounding box of the centres buffered by the widest kernel.

    Cell size is a quarter of the narrowest bandwidth, coarsened if needed so
    neither side exceeds ``max_side`` cells.
    """
    hmax = float(kernels.h.max())
    xmin, xmax = kernels.x.min() - hmax, kernels.x.max() + hmax
    ymin, ymax = kernels.y.min() - hmax, kernels.y.max() + hmax
    span = max(xmax - xmin, ymax - ymin)
    cell = max(float(kernels.h.min()) / 4.0, span / max_side)
    # ceil() can overshoot by one cell through rounding
    while math.ceil((xmax - xmin) / cell) > max_side or math.ceil((ymax - ymin) / cell) > max_side:
        cell = math.nextafter(cell, math.inf) * (1.0 + 1e-12)
    return GridSpec.covering(xmin, ymin, xmax, ymax, cell)


def accumulate(kernels: KernelSet, grid: GridSpec) -> np.ndarray:
    """Raw kernel sum at every cell centre (weight ``1/n`` per kernel).

    Each kernel only touches the window of cells within its support; kernels
    are added in input order so the result is reproducible bit for bit.
    """
    out = np.zeros((grid.n_rows, grid.n_cols))
    cx_all = grid.col_centers()
    cy_all = grid.row_centers()
    c = grid.cell_size
    x0, y0 = grid.origin
    w = kernels.weight
    for kx, ky, h in zip(kernels.x, kernels.y, kernels.h):
        j0 = max(0, int(math.floor((kx - h - x0) / c - 0.5)))
        j1 = min(grid.n_cols, int(math.ceil((kx + h - x0) / c - 0.5)) + 1)
        i0 = max(0, int(math.floor((ky - h - y0) / c - 0.5)))
        i1 = min(grid.n_rows, int(math.ceil((ky + h - y0) / c - 0.5)) + 1)
        if j0 >= j1 or i0 >= i1:
            continue
        dx2 = (cx_all[j0:j1] - kx) ** 2
        dy2 = (cy_all[i0:i1] - ky) ** 2
        d2 = dy2[:, None] + dx2[None, :]
        h2 = h * h
        u = 1.0 - d2 / h2
        vals = np.where(d2 < h2, (w * 3.0 / (math.pi * h2)) * u * u, 0.0)
        out[i0:i1, j0:j1] += vals
    return out


@dataclass(frozen=True, eq=False)
class ActivitySurface:
    grid: GridSpec
    values: np.ndarray
    normalized: bool = False
    bw_s: Optional[float] = None

    def __post_init__(self):
        if self.values.shape != (self.grid.n_rows, self.grid.n_cols):
            raise InvalidArgumentError("values do not match the grid shape")

    def total_mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)

    def normalize(self) -> "ActivitySurface":
        mass = self.total_mass()
        if not mass > 0:
            raise InvalidArgumentError("surface carries no mass on its grid")
        return ActivitySurface(self.grid, self.values / mass, True, self.bw_s)

    @property
    def max(self) -> float:
        return float(self.values.max())

    def argmax_cell(self) -> tuple:
        return tuple(int(i) for i in np.unravel_index(np.argmax(self.values), self.values.shape))


def build_surface(records: Sequence[GeoRecord], proj: Projection, grid: Optional[GridSpec] = None,
                  alpha: float = DEFAULT_ALPHA, mode: str = "variable",
                  floor: float = BANDWIDTH_FLOOR, max_cells: int = DEFAULT_MAX_CELLS,
                  normalize: bool = True) -> ActivitySurface:
    """Kernel density activity surface for one user's records."""
    kernels = kernel_set(records, proj, alpha, mode, floor)
    if grid is None:
        grid = auto_grid(kernels)
    elif grid.n_cells > max_cells:
        raise ResourceLimitError(f"grid of {grid.n_cells} cells exceeds the cap of {max_cells}")
    surface = ActivitySurface(grid, accumulate(kernels, grid), False, kernels.bw_s)
    return surface.normalize() if normalize else surface
