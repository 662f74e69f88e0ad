"""ESRI ASCII grid (.asc) export and import for activity surfaces."""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError
from .geomodel import PlanarPoint
from .vbkde import ActivitySurface, GridSpec

NODATA_VALUE = -9999


def format_asc(surface: ActivitySurface) -> str:
    g = surface.grid
    lines = [
        f"ncols {g.n_cols}",
        f"nrows {g.n_rows}",
        f"xllcorner {float(g.origin.x)!r}",
        f"yllcorner {float(g.origin.y)!r}",
        f"cellsize {float(g.cell_size)!r}",
        f"NODATA_value {NODATA_VALUE}",
    ]
    # rows are stored south-to-north; the file runs north-to-south
    for row in surface.values[::-1]:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_asc(path, surface: ActivitySurface) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_asc(surface))


def read_asc(path) -> ActivitySurface:
    """Read an .asc file written by :func:`write_asc` (corner-registered header).

    NODATA cells come back as NaN.  The returned surface is flagged as
    normalized only if its mass is 1 within 1e-6.
    """
    header = {}
    with open(path, encoding="ascii") as fh:
        for _ in range(6):
            key, value = fh.readline().split()
            header[key.lower()] = value
        data = np.loadtxt(fh, ndmin=2)
    try:
        grid = GridSpec(PlanarPoint(float(header["xllcorner"]), float(header["yllcorner"])),
                        float(header["cellsize"]), int(header["nrows"]), int(header["ncols"]))
    except KeyError as exc:
        raise InvalidArgumentError(f"{path}: missing header field {exc.args[0]}") from None
    nodata = float(header.get("nodata_value", NODATA_VALUE))
    values = data[::-1].copy()
    values[values == nodata] = np.nan
    mass = float(np.nansum(values) * grid.cell_area)
    return ActivitySurface(grid, values, abs(mass - 1.0) <= 1e-6)
