"""File-backed record stores and the two-stage collection pipeline.

Stage one streams a store through a keyword/time/region filter and picks the
users who posted inside the event corridor.  Stage two pulls a capped,
most-recent-first history for each of those users.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError, StoreReadError
from .geomodel import (
    Coordinate,
    GeoRecord,
    Place,
    PlaceScale,
    ProjectedRegion,
    Region,
    representative_latlon,
    regions_projection,
)

log = logging.getLogger(__name__)

DEFAULT_HISTORY_CAP = 3200


class MalformedRecord(ValueError):
    pass


def record_from_json(obj: Mapping) -> GeoRecord:
    """Build a :class:`GeoRecord` from one decoded NDJSON object."""
    if not isinstance(obj, Mapping):
        raise MalformedRecord("record is not a JSON object")
    try:
        rid, uid, ts, text = obj["record_id"], obj["user_id"], obj["timestamp_utc"], obj["text"]
    except KeyError as exc:
        raise MalformedRecord(f"missing field {exc.args[0]!r}") from None
    if not isinstance(ts, int) or isinstance(ts, bool):
        raise MalformedRecord("timestamp_utc must be an integer")
    if not isinstance(text, str):
        raise MalformedRecord("text must be a string")
    has_coord = "lat" in obj or "lon" in obj
    has_place = "place_scale" in obj or "place_boundary" in obj
    if has_coord and has_place:
        raise MalformedRecord("record has both a coordinate and a place")
    try:
        if has_coord:
            georef = Coordinate(float(obj["lat"]), float(obj["lon"]))
        elif has_place:
            georef = Place(PlaceScale.parse(obj["place_scale"]), obj["place_boundary"])
        else:
            georef = None
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(f"bad georeference: {exc}") from None
    return GeoRecord(str(rid), str(uid), ts, text, georef)


def record_to_json(rec: GeoRecord) -> dict:
    out = {"record_id": rec.record_id, "user_id": rec.user_id,
           "timestamp_utc": int(rec.timestamp_utc), "text": rec.text}
    g = rec.georef
    if isinstance(g, Coordinate):
        out["lat"] = g.lat
        out["lon"] = g.lon
    elif isinstance(g, Place):
        out["place_scale"] = g.scale.label
        rings = [r.tolist() for r in g.rings]
        out["place_boundary"] = rings[0] if len(rings) == 1 else rings
    return out


def write_ndjson(path, records: Iterable[GeoRecord]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_json(rec), separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n


@dataclass
class ReadReport:
    """Tally from reading an NDJSON store."""

    n_read: int = 0
    n_malformed: int = 0
    malformed_lines: List[int] = field(default_factory=list)


def iter_ndjson(path, report: Optional[ReadReport] = None) -> Iterator[GeoRecord]:
    """Stream records from an NDJSON file, skipping and counting malformed lines.

    Blank lines are ignored.  Undecodable bytes raise :class:`StoreReadError`
    carrying the byte offset of the offending line.
    """
    report = report if report is not None else ReadReport()
    seen = set()
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise StoreReadError(f"cannot open record store {path}: {exc.strerror}", 0) from exc
    with fh:
        offset = 0
        for lineno, raw in enumerate(fh, start=1):
            start = offset
            offset += len(raw)
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError:
                raise StoreReadError(f"{path}: undecodable bytes on line {lineno}", start) from None
            if not line.strip():
                continue
            try:
                rec = record_from_json(json.loads(line))
                if rec.record_id in seen:
                    raise MalformedRecord(f"duplicate record_id {rec.record_id}")
            except (json.JSONDecodeError, MalformedRecord) as exc:
                report.n_malformed += 1
                report.malformed_lines.append(lineno)
                log.debug("%s:%d skipped: %s", path, lineno, exc)
                continue
            seen.add(rec.record_id)
            report.n_read += 1
            yield rec
    if report.n_malformed:
        log.warning("%s: skipped %d malformed line(s)", path, report.n_malformed)


class RecordStore:
    """In-memory record store: stream order plus a per-user index.

    The per-user index is sorted by timestamp descending; equal timestamps keep
    the reverse of their stream order, so results never depend on dict order.
    """

    def __init__(self, records: Iterable[GeoRecord], report: Optional[ReadReport] = None):
        self._records = list(records)
        self.report = report or ReadReport(n_read=len(self._records))
        ids = set()
        by_user: Dict[str, list] = defaultdict(list)
        for pos, rec in enumerate(self._records):
            if rec.record_id in ids:
                raise InvalidArgumentError(f"duplicate record_id {rec.record_id}")
            ids.add(rec.record_id)
            by_user[rec.user_id].append((-rec.timestamp_utc, -pos, rec))
        self._by_user = {u: [t[2] for t in sorted(v, key=lambda t: t[:2])]
                         for u, v in by_user.items()}

    @classmethod
    def from_ndjson(cls, path) -> "RecordStore":
        report = ReadReport()
        records = list(iter_ndjson(path, report))
        return cls(records, report)

    def __len__(self) -> int:
        return len(self._records)

    def stream(self) -> Iterator[GeoRecord]:
        return iter(self._records)

    def users(self) -> List[str]:
        return sorted(self._by_user)

    def user_records(self, user_id: str) -> List[GeoRecord]:
        return list(self._by_user.get(user_id, ()))


@dataclass(frozen=True)
class FilterSpec:
    keywords: tuple
    start_utc: int
    end_utc: int
    bounding_region: Optional[Region] = None

    def __post_init__(self):
        kws = tuple(k.strip().lower() for k in self.keywords if k.strip())
        if not kws:
            raise InvalidArgumentError("filter needs at least one keyword")
        if self.start_utc > self.end_utc:
            raise InvalidArgumentError("time window start is after its end")
        object.__setattr__(self, "keywords", kws)

    def matches_text(self, text: str) -> bool:
        low = text.lower()
        return any(k in low for k in self.keywords)


def _region_tester(region: Region):
    proj = regions_projection([region])
    pr = ProjectedRegion.from_region(region, proj)

    def inside(rec: GeoRecord) -> bool:
        if rec.georef is None:
            return False
        lat, lon = representative_latlon(rec.georef)
        x, y = proj.forward(lat, lon)
        return bool(pr.contains(x, y))

    return inside


def filter_event_records(store, spec: FilterSpec) -> Iterator[GeoRecord]:
    """Yield event records in store order.

    A record passes when its timestamp lies in ``[start_utc, end_utc)``, its
    lowercased text contains a keyword, and, if a bounding region is set, its
    representative point lies in that region.
    """
    records = store.stream() if isinstance(store, RecordStore) else iter(store)
    inside = _region_tester(spec.bounding_region) if spec.bounding_region is not None else None
    for rec in records:
        if not (spec.start_utc <= rec.timestamp_utc < spec.end_utc):
            continue
        if not spec.matches_text(rec.text):
            continue
        if inside is not None and not inside(rec):
            continue
        yield rec


def select_event_users(records: Iterable[GeoRecord], corridor: Region) -> set:
    inside = _region_tester(corridor)
    return {rec.user_id for rec in records if inside(rec)}


def fetch_history(store: RecordStore, user: str, cap: int = DEFAULT_HISTORY_CAP) -> List[GeoRecord]:
    """Up to ``cap`` most recent records of ``user``, newest first."""
    if cap < 1:
        raise InvalidArgumentError("history cap must be at least 1")
    return store.user_records(user)[:cap]


@dataclass(frozen=True)
class HistoryStats:
    n_total: int
    n_place_referenced: int
    n_coordinate_referenced: int

    @property
    def ratio_place(self) -> float:
        return self.n_place_referenced / self.n_total if self.n_total else 0.0

    @property
    def ratio_coordinate(self) -> float:
        return self.n_coordinate_referenced / self.n_total if self.n_total else 0.0

    def as_row(self) -> dict:
        return {"n_total": self.n_total,
                "n_place_referenced": self.n_place_referenced,
                "n_coordinate_referenced": self.n_coordinate_referenced,
                "ratio_place": self.ratio_place,
                "ratio_coordinate": self.ratio_coordinate}


HISTORY_COLUMNS = ("n_total", "n_place_referenced", "n_coordinate_referenced",
                   "ratio_place", "ratio_coordinate")


def user_history_stats(records: Sequence[GeoRecord]) -> HistoryStats:
    n_place = sum(1 for r in records if isinstance(r.georef, Place))
    n_coord = sum(1 for r in records if isinstance(r.georef, Coordinate))
    return HistoryStats(len(records), n_place, n_coord)


def history_stats(histories: Mapping[str, Sequence[GeoRecord]]):
    """Per-user history statistics plus max/min/median/mean of every column.

    Returns ``(per_user, aggregate)`` where ``aggregate`` maps each of
    ``max``, ``min``, ``median``, ``mean`` to a column -> value dict.
    Users with empty histories are left out of both.
    """
    per_user = {u: user_history_stats(recs) for u, recs in sorted(histories.items()) if recs}
    aggregate = {}
    if per_user:
        table = np.array([[s.as_row()[c] for c in HISTORY_COLUMNS] for s in per_user.values()],
                         dtype=float)
        for name, fn in (("max", np.max), ("min", np.min), ("median", np.median), ("mean", np.mean)):
            aggregate[name] = dict(zip(HISTORY_COLUMNS, (float(v) for v in fn(table, axis=0))))
    return per_user, aggregate
