"""Zone-level hotspot statistics and local-time temporal histograms."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .errors import InvalidArgumentError, NoVarianceError
from .geomodel import (
    GeoRecord,
    Place,
    PlaceScale,
    Projection,
    ProjectedRegion,
    Region,
    project_regions,
    regions_projection,
    representative_latlon,
)

#: (threshold, hot label, cold label), checked from the strictest down
Z_THRESHOLDS = ((2.58, "hot99", "cold99"), (1.96, "hot95", "cold95"), (1.645, "hot90", "cold90"))
NOT_SIGNIFICANT = "not_significant"

CONTIGUITY_TOL_DEG = 1e-6


def _rep_points(records: Sequence[GeoRecord], proj: Projection):
    latlon = np.array([representative_latlon(r.georef) for r in records]).reshape(-1, 2)
    x, y = proj.forward(latlon[:, 0], latlon[:, 1])
    return np.atleast_1d(x), np.atleast_1d(y), latlon


def _first_zone(x, y, pzones: Sequence[ProjectedRegion]) -> np.ndarray:
    """Index of the first zone containing each point, -1 where none does."""
    idx = np.full(len(x), -1, dtype=int)
    for k, pz in enumerate(pzones):
        free = idx < 0
        if not free.any():
            break
        hit = np.zeros_like(free)
        hit[free] = pz.contains(x[free], y[free])
        idx[hit] = k
    return idx


@dataclass
class ZoneCounts:
    region_ids: List[str]
    raw_count: Dict[str, int]
    population: Dict[str, int]
    residual: int = 0
    excluded: int = 0

    def rate(self, region_id: str) -> Optional[float]:
        pop = self.population[region_id]
        return self.raw_count[region_id] / pop if pop > 0 else None


def count_by_zone(records: Sequence[GeoRecord], zones: Sequence[Region],
                  max_scale: PlaceScale = PlaceScale.CITY,
                  proj: Optional[Projection] = None) -> ZoneCounts:
    """Join representative points to zones and count records per zone.

    Records without a georeference, or with a place coarser than
    ``max_scale``, are dropped and tallied in ``excluded``; points falling in
    no zone are tallied in ``residual``.
    """
    max_scale = PlaceScale.parse(max_scale)
    proj = proj or regions_projection(zones)
    keep = [r for r in records if r.georef is not None
            and not (isinstance(r.georef, Place) and r.georef.scale.coarser_than(max_scale))]
    ids = [z.region_id for z in zones]
    counts = dict.fromkeys(ids, 0)
    residual = 0
    if keep:
        x, y, _ = _rep_points(keep, proj)
        which = _first_zone(x, y, project_regions(zones, proj))
        residual = int((which < 0).sum())
        for k, n in zip(*np.unique(which[which >= 0], return_counts=True)):
            counts[ids[k]] = int(n)
    return ZoneCounts(ids, counts, {z.region_id: int(z.population) for z in zones},
                      residual, len(records) - len(keep))


def _point_segment_dist(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    seg2 = (d * d).sum(axis=1)
    rel = pts[:, None, :] - a[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(seg2 > 0, (rel * d[None]).sum(axis=2) / seg2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    near = a[None] + t[..., None] * d[None]
    return np.sqrt(((pts[:, None, :] - near) ** 2).sum(axis=2))


def _touches(ra: tuple, rb: tuple, tol: float) -> bool:
    for ring_a in ra:
        for ring_b in rb:
            if (_point_segment_dist(ring_a[:-1], ring_b[:-1], ring_b[1:]) <= tol).any():
                return True
            if (_point_segment_dist(ring_b[:-1], ring_a[:-1], ring_a[1:]) <= tol).any():
                return True
    return False


def contiguity(zones: Sequence[Region], tol: float = CONTIGUITY_TOL_DEG) -> Dict[str, set]:
    """Zones sharing at least one boundary point (within ``tol`` degrees)."""
    boxes = np.array([z.bbox for z in zones])
    adj = {z.region_id: set() for z in zones}
    for i in range(len(zones)):
        cand = np.flatnonzero((boxes[i + 1:, 0] <= boxes[i, 2] + tol)
                              & (boxes[i + 1:, 2] >= boxes[i, 0] - tol)
                              & (boxes[i + 1:, 1] <= boxes[i, 3] + tol)
                              & (boxes[i + 1:, 3] >= boxes[i, 1] - tol)) + i + 1
        for j in cand:
            if _touches(zones[i].rings, zones[j].rings, tol):
                adj[zones[i].region_id].add(zones[j].region_id)
                adj[zones[j].region_id].add(zones[i].region_id)
    return adj


@dataclass(frozen=True)
class HotspotRow:
    region_id: str
    analysis_value: float
    gi_star_z: float
    classification: str


def classify_z(z: float) -> str:
    for thr, hot, cold in Z_THRESHOLDS:
        if z >= thr:
            return hot
        if z <= -thr:
            return cold
    return NOT_SIGNIFICANT


def analysis_values(counts: ZoneCounts, use_rate: bool) -> Dict[str, float]:
    if not use_rate:
        return {rid: float(counts.raw_count[rid]) for rid in counts.region_ids}
    out = {}
    dropped = []
    for rid in counts.region_ids:
        rate = counts.rate(rid)
        if rate is None:
            dropped.append(rid)
        else:
            out[rid] = rate
    if dropped:
        warnings.warn(f"rate analysis excludes {len(dropped)} zero-population zone(s): "
                      + ", ".join(dropped[:10]), stacklevel=3)
    return out


def gi_star(counts, adjacency: Mapping[str, set], use_rate: bool = False) -> List[HotspotRow]:
    """Getis-Ord Gi* z-scores with self-inclusive binary contiguity weights.

    ``counts`` is a :class:`ZoneCounts` or a plain ``region_id -> value``
    mapping (``use_rate`` is ignored for the latter).  Rows come back in the
    input zone order.  A set of identical values yields z = 0 everywhere.
    """
    values = analysis_values(counts, use_rate) if isinstance(counts, ZoneCounts) else dict(counts)
    ids = list(values)
    n = len(ids)
    if n < 3:
        raise NoVarianceError(f"Gi* needs at least 3 zones, got {n}")
    pos = {rid: k for k, rid in enumerate(ids)}
    x = np.array([values[rid] for rid in ids], dtype=float)
    rows, cols = [], []
    for rid in ids:
        i = pos[rid]
        neigh = {pos[j] for j in adjacency.get(rid, ()) if j in pos}
        neigh.add(i)
        rows.extend([i] * len(neigh))
        cols.extend(sorted(neigh))
    W = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    w_sum = np.asarray(W.sum(axis=1)).ravel()
    mean = x.mean()
    s = x.std()
    # identical values can still leave a rounding-level std behind
    if np.ptp(x) == 0.0 or s == 0.0:
        z = np.zeros(n)
    else:
        num = W @ x - mean * w_sum
        den = s * np.sqrt((n * w_sum - w_sum ** 2) / (n - 1))
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(den > 0, num / den, 0.0)
    return [HotspotRow(rid, float(x[k]), float(z[k]), classify_z(float(z[k])))
            for k, rid in enumerate(ids)]


def write_hotspots_csv(path, rows: Sequence[HotspotRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region_id", "value", "gi_star_z", "classification"])
        for r in rows:
            w.writerow([r.region_id, repr(r.analysis_value), repr(r.gi_star_z), r.classification])


def write_zone_counts_csv(path, counts: ZoneCounts) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region_id", "raw_count", "population", "rate"])
        for rid in counts.region_ids:
            rate = counts.rate(rid)
            w.writerow([rid, counts.raw_count[rid], counts.population[rid],
                        "" if rate is None else repr(rate)])


# -- temporal distribution ----------------------------------------------------

@dataclass
class TemporalHistogram:
    """Counts per (local day, local hour), split by corridor membership."""

    days: List[date]
    inside: np.ndarray
    outside: np.ndarray
    diagnostics: Dict[str, int] = field(default_factory=dict)

    def total(self) -> int:
        return int(self.inside.sum() + self.outside.sum())

    def rows(self):
        for d, day in enumerate(self.days):
            for hour in range(24):
                yield day, hour, int(self.inside[d, hour]), int(self.outside[d, hour])


def utc_offsets(records: Sequence[GeoRecord], zones: Sequence[Region],
                proj: Optional[Projection] = None) -> Tuple[np.ndarray, int]:
    """Offset in hours per record and the number resolved by longitude.

    The containing zone's ``utc_offset_hours`` wins; otherwise
    ``round(lon / 15)``.
    """
    if not records:
        return np.zeros(0), 0
    proj = proj or regions_projection(zones)
    x, y, latlon = _rep_points(records, proj)
    which = _first_zone(x, y, project_regions(zones, proj))
    zone_off = [z.utc_offset_hours for z in zones]
    offsets = np.empty(len(records))
    fallback = 0
    for k, zi in enumerate(which):
        off = zone_off[zi] if zi >= 0 else None
        if off is None:
            off = float(np.round(latlon[k, 1] / 15.0))
            fallback += 1
        offsets[k] = off
    return offsets, fallback


def temporal_histogram(records: Sequence[GeoRecord], corridor: Region,
                       zones: Sequence[Region], day_range: Tuple[date, date]) -> TemporalHistogram:
    """Hour-of-day histogram in local time, inside versus outside the corridor.

    ``day_range`` is inclusive on both ends and refers to local dates.
    """
    d0, d1 = day_range
    if d1 < d0:
        raise InvalidArgumentError("day range ends before it starts")
    days = [d0 + timedelta(days=k) for k in range((d1 - d0).days + 1)]
    inside = np.zeros((len(days), 24), dtype=np.int64)
    outside = np.zeros_like(inside)
    located = [r for r in records if r.georef is not None]
    diag = {"unlocated": len(records) - len(located), "offset_fallback": 0, "out_of_range": 0}
    if located:
        proj = regions_projection(list(zones) + [corridor])
        offsets, diag["offset_fallback"] = utc_offsets(located, zones, proj)
        x, y, _ = _rep_points(located, proj)
        in_corr = ProjectedRegion.from_region(corridor, proj).contains(x, y)
        for rec, off, flag in zip(located, offsets, in_corr):
            local = datetime.fromtimestamp(rec.timestamp_utc + int(round(off * 3600)), tz=timezone.utc)
            d = (local.date() - d0).days
            if not 0 <= d < len(days):
                diag["out_of_range"] += 1
                continue
            (inside if flag else outside)[d, local.hour] += 1
    return TemporalHistogram(days, inside, outside, diag)


def write_histogram_csv(path, hist: TemporalHistogram) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "hour", "inside_count", "outside_count"])
        for day, hour, n_in, n_out in hist.rows():
            w.writerow([day.isoformat(), hour, n_in, n_out])
