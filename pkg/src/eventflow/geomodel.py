"""Domain types, equirectangular projection and planar polygon primitives.

Rings are stored as ``(k, 2)`` float arrays.  Geographic rings use GeoJSON
axis order ``(lon, lat)``; planar rings hold ``(x, y)`` in meters.  A ring is
always closed (first vertex repeated at the end) after construction.
"""

from __future__ import annotations

import json
import functools
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import InvalidArgumentError, InvalidGeometryError

EARTH_RADIUS_M = 6_371_008.8

#: distance (in the ring's own units) under which a point counts as on the boundary
BOUNDARY_TOL = 1e-6


class PlaceScale(IntEnum):
    """Scale of a place georeference; larger value means coarser."""

    POI = 0
    NEIGHBORHOOD = 1
    CITY = 2
    ADMIN = 3
    COUNTRY = 4

    @classmethod
    def parse(cls, name: Union[str, "PlaceScale"]) -> "PlaceScale":
        if isinstance(name, PlaceScale):
            return name
        try:
            return cls[str(name).strip().upper()]
        except KeyError:
            raise InvalidArgumentError(f"unknown place scale: {name!r}") from None

    @property
    def label(self) -> str:
        return self.name.lower()

    def coarser_than(self, other: "PlaceScale") -> bool:
        return self > other


def _as_ring(points, what="ring") -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidGeometryError(f"{what} must be a sequence of (x, y) pairs")
    if not np.all(np.isfinite(arr)):
        raise InvalidGeometryError(f"{what} has non-finite coordinates")
    if len(arr) == 0:
        raise InvalidGeometryError(f"{what} is empty")
    if not np.array_equal(arr[0], arr[-1]):
        arr = np.vstack([arr, arr[:1]])
    if len(set(map(tuple, arr[:-1].tolist()))) < 3:
        raise InvalidGeometryError(f"{what} needs at least 3 distinct vertices")
    arr.setflags(write=False)
    return arr


def _as_rings(rings, what="boundary") -> tuple:
    """Accept one ring or a sequence of rings; return a tuple of closed rings."""
    arr = rings
    if isinstance(rings, np.ndarray) and rings.ndim == 2:
        return (_as_ring(rings, what),)
    try:
        first = rings[0][0]
    except (TypeError, IndexError):
        raise InvalidGeometryError(f"{what} is empty or malformed") from None
    if np.ndim(first) == 0:
        return (_as_ring(arr, what),)
    out = tuple(_as_ring(r, what) for r in rings)
    if not out:
        raise InvalidGeometryError(f"{what} has no rings")
    return out


def _check_latlon(lat: float, lon: float) -> None:
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise InvalidGeometryError(f"non-finite coordinate ({lat}, {lon})")
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise InvalidGeometryError(f"coordinate out of range ({lat}, {lon})")


def _check_ring_latlon(ring: np.ndarray) -> None:
    lon, lat = ring[:, 0], ring[:, 1]
    if np.any(np.abs(lat) > 90.0) or np.any(np.abs(lon) > 180.0):
        raise InvalidGeometryError("ring vertex out of lat/lon range")


@dataclass(frozen=True)
class Coordinate:
    lat: float
    lon: float

    def __post_init__(self):
        _check_latlon(self.lat, self.lon)


@dataclass(frozen=True, eq=False)
class Place:
    scale: PlaceScale
    rings: tuple

    def __post_init__(self):
        object.__setattr__(self, "scale", PlaceScale.parse(self.scale))
        rings = _as_rings(self.rings, "place boundary")
        for ring in rings:
            _check_ring_latlon(ring)
        object.__setattr__(self, "rings", rings)

    def __eq__(self, other):
        if not isinstance(other, Place):
            return NotImplemented
        return (self.scale == other.scale and len(self.rings) == len(other.rings)
                and all(np.array_equal(a, b) for a, b in zip(self.rings, other.rings)))

    __hash__ = None

    # places are immutable, so derived geometry is computed once
    @functools.cached_property
    def centroid_latlon(self) -> tuple:
        c = rings_centroid(self.rings)
        return c.y, c.x

    @functools.cached_property
    def area_m2(self) -> float:
        lo_lon, lo_lat = np.vstack(self.rings).min(axis=0)
        hi_lon, hi_lat = np.vstack(self.rings).max(axis=0)
        proj = Projection((lo_lat + hi_lat) / 2.0, (lo_lon + hi_lon) / 2.0)
        # rings were validated on construction, so go straight to the shoelace
        total = 0.0
        for r in self.rings:
            xy = proj.forward_ring(r)
            a = abs(_signed_area_and_moments(xy - xy[0])[0])
            if a == 0.0:
                raise InvalidGeometryError("ring encloses zero area")
            total += a
        return float(total)


Georeference = Union[Coordinate, Place]


@dataclass(frozen=True)
class GeoRecord:
    record_id: str
    user_id: str
    timestamp_utc: int
    text: str
    georef: Optional[Georeference] = None

    @property
    def is_place(self) -> bool:
        return isinstance(self.georef, Place)

    @property
    def is_coordinate(self) -> bool:
        return isinstance(self.georef, Coordinate)


@dataclass(frozen=True, eq=False)
class Region:
    region_id: str
    name: str
    rings: tuple
    population: int = 0
    utc_offset_hours: Optional[float] = None

    def __post_init__(self):
        rings = _as_rings(self.rings, f"region {self.region_id}")
        for ring in rings:
            _check_ring_latlon(ring)
        object.__setattr__(self, "rings", rings)
        if self.population < 0:
            raise InvalidArgumentError(f"region {self.region_id}: negative population")

    @property
    def bbox(self) -> tuple:
        """(min_lon, min_lat, max_lon, max_lat)"""
        allpts = np.vstack(self.rings)
        return (*allpts.min(axis=0), *allpts.max(axis=0))


class PlanarPoint(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Projection:
    """Equirectangular projection about ``(origin_lat, origin_lon)``."""

    origin_lat: float
    origin_lon: float
    earth_radius: float = EARTH_RADIUS_M

    def __post_init__(self):
        _check_latlon(self.origin_lat, self.origin_lon)

    @property
    def _kx(self) -> float:
        return self.earth_radius * math.cos(math.radians(self.origin_lat))

    def forward(self, lat, lon):
        """Vectorised forward transform; returns ``(x, y)`` arrays."""
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        x = self._kx * np.radians(lon - self.origin_lon)
        y = self.earth_radius * np.radians(lat - self.origin_lat)
        return x, y

    def inverse(self, x, y):
        """Vectorised inverse transform; returns ``(lat, lon)`` arrays."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        lat = self.origin_lat + np.degrees(y / self.earth_radius)
        lon = self.origin_lon + np.degrees(x / self._kx)
        return lat, lon

    def forward_ring(self, ring: np.ndarray) -> np.ndarray:
        x, y = self.forward(ring[:, 1], ring[:, 0])
        return np.column_stack([x, y])

    @classmethod
    def centered_on(cls, lats, lons) -> "Projection":
        lats = np.asarray(lats, dtype=float)
        lons = np.asarray(lons, dtype=float)
        if lats.size == 0:
            raise InvalidArgumentError("cannot center a projection on zero points")
        return cls(float(lats.mean()), float(lons.mean()))


def project_forward(p, proj: Projection) -> PlanarPoint:
    """Project one ``(lat, lon)`` pair (or :class:`Coordinate`) to meters."""
    lat, lon = (p.lat, p.lon) if isinstance(p, Coordinate) else p
    lat, lon = float(lat), float(lon)
    _check_latlon(lat, lon)
    x, y = proj.forward(lat, lon)
    return PlanarPoint(float(x), float(y))


def project_inverse(p: PlanarPoint, proj: Projection) -> tuple:
    if not (math.isfinite(p[0]) and math.isfinite(p[1])):
        raise InvalidGeometryError(f"non-finite planar point {p}")
    lat, lon = proj.inverse(p[0], p[1])
    return float(lat), float(lon)


def _signed_area_and_moments(ring: np.ndarray):
    x0, y0 = ring[:-1, 0], ring[:-1, 1]
    x1, y1 = ring[1:, 0], ring[1:, 1]
    cross = x0 * y1 - x1 * y0
    a2 = cross.sum()
    cx = ((x0 + x1) * cross).sum()
    cy = ((y0 + y1) * cross).sum()
    return a2 / 2.0, cx, cy


def polygon_area(ring) -> float:
    """Absolute shoelace area of a closed planar ring.

    Raises :class:`InvalidGeometryError` for fewer than three distinct
    vertices or a ring enclosing zero area.
    """
    ring = _as_ring(ring)
    # shift to the first vertex; keeps the cross products well conditioned
    local = ring - ring[0]
    area = abs(_signed_area_and_moments(local)[0])
    if area == 0.0:
        raise InvalidGeometryError("ring encloses zero area")
    return float(area)


def rings_area(rings) -> float:
    """Sum of ring areas (disjoint-union semantics, holes not modelled)."""
    return float(sum(polygon_area(r) for r in _as_rings(rings)))


def polygon_centroid(ring) -> PlanarPoint:
    """Area-weighted centroid; falls back to the vertex mean for zero-area rings."""
    ring = _as_ring(ring)
    origin = ring[0]
    local = ring - origin
    a, cx, cy = _signed_area_and_moments(local)
    if a == 0.0:
        mean = ring[:-1].mean(axis=0)
        return PlanarPoint(float(mean[0]), float(mean[1]))
    return PlanarPoint(float(cx / (6.0 * a) + origin[0]), float(cy / (6.0 * a) + origin[1]))


def rings_centroid(rings) -> PlanarPoint:
    rings = _as_rings(rings)
    if len(rings) == 1:
        return polygon_centroid(rings[0])
    weights, pts = [], []
    for r in rings:
        local = r - r[0]
        weights.append(abs(_signed_area_and_moments(local)[0]))
        pts.append(polygon_centroid(r))
    w = np.asarray(weights)
    pts = np.asarray(pts)
    if w.sum() == 0.0:
        return PlanarPoint(*map(float, pts.mean(axis=0)))
    c = (pts * w[:, None]).sum(axis=0) / w.sum()
    return PlanarPoint(float(c[0]), float(c[1]))


def representative_latlon(georef: Georeference) -> tuple:
    """Coordinate itself, or the centroid of the place boundary, as (lat, lon).

    The centroid is computed directly in (lon, lat) space.  Any equirectangular
    projection is affine in (lon, lat), and the area centroid is affine
    equivariant, so this equals the planar centroid mapped back.
    """
    if isinstance(georef, Coordinate):
        return georef.lat, georef.lon
    if isinstance(georef, Place):
        return georef.centroid_latlon
    raise InvalidArgumentError("record has no georeference")


def representative_point(georef: Georeference, proj: Projection) -> PlanarPoint:
    lat, lon = representative_latlon(georef)
    x, y = proj.forward(lat, lon)
    return PlanarPoint(float(x), float(y))


def place_area_m2(place: Place) -> float:
    """Area of a place boundary in m², using a projection local to the place."""
    return place.area_m2


def _point_in_rings(x: float, y: float, rings, tol: float) -> bool:
    """Scalar twin of :func:`points_in_rings`, same arithmetic without numpy overhead."""
    inside = False
    tol2 = tol * tol
    for ring in rings:
        pts = ring.tolist()
        for (x1, y1), (x2, y2) in zip(pts[:-1], pts[1:]):
            dx, dy = x2 - x1, y2 - y1
            if (y1 > y) != (y2 > y) and x < x1 + (y - y1) * dx / (y2 - y1):
                inside = not inside
            seg2 = dx * dx + dy * dy
            if seg2 == 0.0:
                d2 = (x - x1) ** 2 + (y - y1) ** 2
            else:
                t = min(1.0, max(0.0, ((x - x1) * dx + (y - y1) * dy) / seg2))
                d2 = (x1 + t * dx - x) ** 2 + (y1 + t * dy - y) ** 2
            if d2 <= tol2:
                return True
    return inside


def points_in_rings(xs, ys, rings: Sequence[np.ndarray], tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Vectorised even-odd test over all rings; boundary points count as inside."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim == 0 and ys.ndim == 0:
        return np.asarray(_point_in_rings(float(xs), float(ys), rings, tol))
    inside = np.zeros(np.broadcast(xs, ys).shape, dtype=bool)
    on_edge = np.zeros_like(inside)
    tol2 = tol * tol
    for ring in rings:
        for (x1, y1), (x2, y2) in zip(ring[:-1], ring[1:]):
            dx, dy = x2 - x1, y2 - y1
            crosses = (y1 > ys) != (y2 > ys)
            if crosses.any():
                with np.errstate(divide="ignore", invalid="ignore"):
                    x_int = x1 + (ys - y1) * dx / (y2 - y1)
                inside ^= crosses & (xs < x_int)
            seg2 = dx * dx + dy * dy
            if seg2 == 0.0:
                d2 = (xs - x1) ** 2 + (ys - y1) ** 2
            else:
                t = np.clip(((xs - x1) * dx + (ys - y1) * dy) / seg2, 0.0, 1.0)
                d2 = (x1 + t * dx - xs) ** 2 + (y1 + t * dy - ys) ** 2
            on_edge |= d2 <= tol2
    return inside | on_edge


@dataclass(frozen=True, eq=False)
class ProjectedRegion:
    region: Region
    rings: tuple
    bbox: tuple = field(repr=False)

    @classmethod
    def from_region(cls, region: Region, proj: Projection) -> "ProjectedRegion":
        rings = tuple(proj.forward_ring(r) for r in region.rings)
        pts = np.vstack(rings)
        return cls(region, rings, (*pts.min(axis=0), *pts.max(axis=0)))

    @property
    def region_id(self) -> str:
        return self.region.region_id

    def contains(self, xs, ys) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        x0, y0, x1, y1 = self.bbox
        t = BOUNDARY_TOL
        cand = (xs >= x0 - t) & (xs <= x1 + t) & (ys >= y0 - t) & (ys <= y1 + t)
        out = np.zeros(np.broadcast(xs, ys).shape, dtype=bool)
        if cand.any():
            xb, yb = np.broadcast_arrays(xs, ys)
            out[cand] = points_in_rings(xb[cand], yb[cand], self.rings)
        return out


def point_in_region(p: PlanarPoint, region: ProjectedRegion) -> bool:
    return bool(region.contains(p[0], p[1]))


def project_regions(regions: Iterable[Region], proj: Projection) -> list:
    return [ProjectedRegion.from_region(r, proj) for r in regions]


def regions_projection(regions: Sequence[Region]) -> Projection:
    """Projection centered on the bounding box of a region set."""
    boxes = np.array([r.bbox for r in regions])
    return Projection((boxes[:, 1].min() + boxes[:, 3].max()) / 2.0,
                      (boxes[:, 0].min() + boxes[:, 2].max()) / 2.0)


# -- GeoJSON region sets ----------------------------------------------------

def _feature_rings(geom: dict) -> list:
    kind = geom.get("type")
    coords = geom.get("coordinates")
    if kind == "Polygon":
        return [coords[0]]
    if kind == "MultiPolygon":
        return [poly[0] for poly in coords]
    raise InvalidGeometryError(f"unsupported geometry type {kind!r}")


def region_from_feature(feature: dict) -> Region:
    props = feature.get("properties") or {}
    if "region_id" not in props:
        raise InvalidArgumentError("feature lacks a region_id property")
    offset = props.get("utc_offset_hours")
    return Region(
        region_id=str(props["region_id"]),
        name=str(props.get("name", props["region_id"])),
        rings=tuple(_feature_rings(feature["geometry"])),
        population=int(props.get("population", 0)),
        utc_offset_hours=None if offset is None else float(offset),
    )


def load_regions(path) -> list:
    """Read a FeatureCollection of Polygon/MultiPolygon region features."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") == "Feature":
        features = [doc]
    else:
        features = doc.get("features", [])
    regions = [region_from_feature(f) for f in features]
    ids = [r.region_id for r in regions]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise InvalidArgumentError(f"{path}: duplicate region_id values: {', '.join(dupes)}")
    return regions


def region_to_feature(region: Region) -> dict:
    polys = [[ring.tolist()] for ring in region.rings]
    geom = ({"type": "Polygon", "coordinates": polys[0]} if len(polys) == 1
            else {"type": "MultiPolygon", "coordinates": polys})
    props = {"region_id": region.region_id, "name": region.name,
             "population": int(region.population)}
    if region.utc_offset_hours is not None:
        props["utc_offset_hours"] = region.utc_offset_hours
    return {"type": "Feature", "properties": props, "geometry": geom}


def write_regions(path, regions: Iterable[Region]) -> None:
    doc = {"type": "FeatureCollection", "features": [region_to_feature(r) for r in regions]}
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")
