"""Deterministic synthetic cohorts with known homes and event destinations.

Each user draws from its own generator seeded by ``(seed, user_index)``, so a
user's records do not depend on how many users precede it or on the order
in which users are generated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import parse_date, parse_weights, read_kv_file
from .errors import ConfigError, InvalidArgumentError
from .geomodel import (
    EARTH_RADIUS_M,
    Coordinate,
    GeoRecord,
    Place,
    PlaceScale,
    Region,
    load_regions,
    points_in_rings,
    write_regions,
)
from .ingest import RecordStore, write_ndjson

COORDINATE = "coordinate"

PLACE_SIDE_M = {
    PlaceScale.POI: 100.0,
    PlaceScale.NEIGHBORHOOD: 1_000.0,
    PlaceScale.CITY: 10_000.0,
    PlaceScale.ADMIN: 200_000.0,
    PlaceScale.COUNTRY: 3_000_000.0,
}

EVENT_TEXTS = (
    "Watching the eclipse with the whole family",
    "TOTALITY!!! unreal",
    "Eclipse glasses on, sky going dark",
    "Made it to the path of totality",
    "best #eclipse view ever",
)
CHATTER_TEXTS = (
    "good morning",
    "coffee first",
    "traffic is terrible today",
    "new running shoes",
    "dinner with friends",
    "what a game last night",
    "back at work",
)

_LATTICE = 48


@dataclass
class ScenarioSpec:
    seed: int
    regions: List[Region]
    cohort_size: int
    records_min: int = 20
    records_max: int = 60
    home_fidelity: float = 0.8
    home_sigma_m: float = 5_000.0
    scale_mix: Dict[str, float] = field(default_factory=lambda: {
        COORDINATE: 0.2, "poi": 0.15, "neighborhood": 0.15, "city": 0.35, "admin": 0.15})
    ungeoref_fraction: float = 0.0
    corridor: Optional[Region] = None
    event_day: date = date(2017, 8, 21)
    event_hour_utc: float = 18.0
    event_hour_sd: float = 1.5
    event_records_min: int = 1
    event_records_max: int = 3
    chatter_max: int = 2
    history_days: int = 90
    travel: Dict[str, Dict[str, float]] = field(default_factory=dict)
    home_weighting: str = "population"
    place_side_m: Dict[PlaceScale, float] = field(default_factory=lambda: dict(PLACE_SIDE_M))

    def __post_init__(self):
        if not self.regions:
            raise InvalidArgumentError("scenario needs at least one region")
        if self.cohort_size < 0:
            raise InvalidArgumentError("cohort_size must be non-negative")
        if not 1 <= self.records_min <= self.records_max:
            raise InvalidArgumentError("need 1 <= records_min <= records_max")
        if not 0 <= self.event_records_min <= self.event_records_max:
            raise InvalidArgumentError("need 0 <= event_records_min <= event_records_max")
        if not 0.0 <= self.home_fidelity <= 1.0:
            raise InvalidArgumentError("home_fidelity must lie in [0, 1]")
        if not 0.0 <= self.ungeoref_fraction < 1.0:
            raise InvalidArgumentError("ungeoref_fraction must lie in [0, 1)")
        mix = {}
        for k, p in self.scale_mix.items():
            key = COORDINATE if k == COORDINATE else PlaceScale.parse(k).label
            mix[key] = float(p)
        if any(p < 0 for p in mix.values()) or not math.isclose(sum(mix.values()), 1.0, abs_tol=1e-9):
            raise InvalidArgumentError("scale_mix probabilities must be non-negative and sum to 1")
        self.scale_mix = mix
        ids = {r.region_id for r in self.regions}
        for origin, row in self.travel.items():
            if origin not in ids or any(d not in ids for d in row):
                raise InvalidArgumentError(f"travel row {origin!r} names an unknown region")
            if any(p < 0 for p in row.values()) or not math.isclose(sum(row.values()), 1.0, abs_tol=1e-9):
                raise InvalidArgumentError(f"travel row {origin!r} must sum to 1")
        if self.home_weighting not in ("population", "uniform"):
            raise InvalidArgumentError("home_weighting must be 'population' or 'uniform'")

    @property
    def event_week(self) -> Tuple[int, int]:
        """UTC window ``[start, end)`` of the event week (event day -3 .. +4)."""
        start = datetime(self.event_day.year, self.event_day.month, self.event_day.day,
                         tzinfo=timezone.utc) - timedelta(days=3)
        return int(start.timestamp()), int((start + timedelta(days=7)).timestamp())


@dataclass(frozen=True)
class TruthRow:
    user_id: str
    home_region_id: str
    destination_region_id: Optional[str]
    traveled: bool
    in_corridor: bool
    n_event_records: int


class _RegionSampler:
    """Uniform and lattice-based point sampling inside one region."""

    def __init__(self, region: Region, corridor: Optional[Region]):
        self.region = region
        self.bbox = region.bbox
        self.rings = region.rings
        self.corridor_points = np.zeros((0, 2))
        x0, y0, x1, y1 = self.bbox
        self.step = (max(x1 - x0, 1e-9) / _LATTICE, max(y1 - y0, 1e-9) / _LATTICE)
        if corridor is not None:
            gx = x0 + (np.arange(_LATTICE) + 0.5) * self.step[0]
            gy = y0 + (np.arange(_LATTICE) + 0.5) * self.step[1]
            X, Y = np.meshgrid(gx, gy)
            X, Y = X.ravel(), Y.ravel()
            both = points_in_rings(X, Y, self.rings) & points_in_rings(X, Y, corridor.rings)
            self.corridor_points = np.column_stack([X[both], Y[both]])
        self.corridor = corridor

    @property
    def meets_corridor(self) -> bool:
        return len(self.corridor_points) > 0

    def contains(self, lon, lat) -> bool:
        return bool(points_in_rings(lon, lat, self.rings))

    def uniform(self, rng) -> Tuple[float, float]:
        x0, y0, x1, y1 = self.bbox
        for _ in range(1000):
            lon, lat = rng.uniform(x0, x1), rng.uniform(y0, y1)
            if self.contains(lon, lat):
                return lon, lat
        raise InvalidArgumentError(f"cannot sample inside region {self.region.region_id}")

    def in_corridor(self, rng) -> Tuple[float, float]:
        base = self.corridor_points[rng.integers(len(self.corridor_points))]
        for _ in range(20):
            lon = base[0] + rng.uniform(-0.5, 0.5) * self.step[0]
            lat = base[1] + rng.uniform(-0.5, 0.5) * self.step[1]
            if self.contains(lon, lat) and points_in_rings(lon, lat, self.corridor.rings):
                return lon, lat
        return float(base[0]), float(base[1])


def _scatter(rng, lon, lat, sigma_m) -> Tuple[float, float]:
    dy = rng.normal(0.0, sigma_m)
    dx = rng.normal(0.0, sigma_m)
    dlat = math.degrees(dy / EARTH_RADIUS_M)
    dlon = math.degrees(dx / (EARTH_RADIUS_M * max(math.cos(math.radians(lat)), 1e-6)))
    return lon + dlon, lat + dlat


def _box(lon, lat, side_m) -> list:
    half_lat = math.degrees(side_m / 2.0 / EARTH_RADIUS_M)
    half_lon = math.degrees(side_m / 2.0 / (EARTH_RADIUS_M * max(math.cos(math.radians(lat)), 1e-6)))
    s = max(-89.9, lat - half_lat)
    n = min(89.9, lat + half_lat)
    w = max(-180.0, lon - half_lon)
    e = min(180.0, lon + half_lon)
    return [[w, s], [e, s], [e, n], [w, n], [w, s]]


class _Generator:
    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.samplers = [_RegionSampler(r, spec.corridor) for r in spec.regions]
        self.by_id = {s.region.region_id: s for s in self.samplers}
        pops = np.array([max(r.population, 0) for r in spec.regions], dtype=float)
        if spec.home_weighting == "uniform" or pops.sum() == 0:
            pops = np.ones(len(spec.regions))
        self.home_p = pops / pops.sum()
        self.mix_keys = list(spec.scale_mix)
        self.mix_p = np.array([spec.scale_mix[k] for k in self.mix_keys])
        self.week_start, _ = spec.event_week
        d = spec.event_day
        self.event_midnight = int(datetime(d.year, d.month, d.day, tzinfo=timezone.utc).timestamp())

    def georef(self, rng, lon, lat):
        kind = self.mix_keys[rng.choice(len(self.mix_keys), p=self.mix_p)]
        if kind == COORDINATE:
            return Coordinate(float(np.clip(lat, -90, 90)), float(np.clip(lon, -180, 180)))
        scale = PlaceScale.parse(kind)
        side = self.spec.place_side_m[scale] * rng.uniform(0.5, 1.5)
        return Place(scale, _box(lon, lat, side))

    def home_point(self, rng, sampler, anchor):
        for _ in range(50):
            lon, lat = _scatter(rng, anchor[0], anchor[1], self.spec.home_sigma_m)
            if sampler.contains(lon, lat):
                return lon, lat
        return anchor

    def user(self, index: int):
        spec = self.spec
        rng = np.random.default_rng([spec.seed, index])
        uid = f"u{index:06d}"
        home = self.samplers[rng.choice(len(self.samplers), p=self.home_p)]
        home_id = home.region.region_id
        anchor = home.uniform(rng)

        row = spec.travel.get(home_id, {home_id: 1.0})
        dests = sorted(row)
        dest_id = dests[rng.choice(len(dests), p=np.array([row[d] for d in dests]))]
        dest = self.by_id[dest_id]

        events = []
        n_event = int(rng.integers(spec.event_records_min, spec.event_records_max + 1))
        for _ in range(n_event):
            if dest.meets_corridor:
                lon, lat = dest.in_corridor(rng)
            elif dest is home:
                lon, lat = self.home_point(rng, home, anchor)
            else:
                lon, lat = dest.uniform(rng)
            hour = float(np.clip(rng.normal(spec.event_hour_utc, spec.event_hour_sd), 0.0, 23.999))
            ts = self.event_midnight + int(hour * 3600)
            text = EVENT_TEXTS[rng.integers(len(EVENT_TEXTS))]
            events.append((ts, text, self.georef(rng, lon, lat)))

        history = []
        n_hist = int(rng.integers(spec.records_min, spec.records_max + 1))
        span = spec.history_days * 86400
        for _ in range(n_hist):
            ts = self.week_start - 1 - int(rng.integers(0, span))
            text = CHATTER_TEXTS[rng.integers(len(CHATTER_TEXTS))]
            if rng.random() < spec.ungeoref_fraction:
                history.append((ts, text, None))
                continue
            if rng.random() < spec.home_fidelity:
                lon, lat = self.home_point(rng, home, anchor)
            else:
                lon, lat = self.samplers[rng.integers(len(self.samplers))].uniform(rng)
            history.append((ts, text, self.georef(rng, lon, lat)))
        for _ in range(int(rng.integers(0, spec.chatter_max + 1))):
            ts = self.week_start + int(rng.integers(0, 7 * 86400))
            lon, lat = self.home_point(rng, home, anchor)
            history.append((ts, CHATTER_TEXTS[rng.integers(len(CHATTER_TEXTS))],
                            self.georef(rng, lon, lat)))

        items = sorted(history + events, key=lambda t: t[0])
        records = [GeoRecord(f"{uid}-{k:05d}", uid, ts, text, g) for k, (ts, text, g) in enumerate(items)]
        truth = TruthRow(uid, home_id, dest_id, dest_id != home_id,
                         dest.meets_corridor and n_event > 0, n_event)
        return records, truth


def generate(spec: ScenarioSpec) -> Tuple[RecordStore, List[TruthRow]]:
    """Synthesise a record store and its ground truth."""
    gen = _Generator(spec)
    records: List[GeoRecord] = []
    truth: List[TruthRow] = []
    for i in range(spec.cohort_size):
        recs, t = gen.user(i)
        records.extend(recs)
        truth.append(t)
    return RecordStore(records), truth


def corridor_region_ids(regions: Sequence[Region], corridor: Region) -> List[str]:
    """Regions whose sampling lattice meets the corridor."""
    return [r.region_id for r in regions if _RegionSampler(r, corridor).meets_corridor]


def write_truth_csv(path, truth: Sequence[TruthRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "home_region_id", "destination_region_id", "traveled",
                    "in_corridor", "n_event_records"])
        for t in truth:
            w.writerow([t.user_id, t.home_region_id, t.destination_region_id or "",
                        str(t.traveled).lower(), str(t.in_corridor).lower(), t.n_event_records])


def read_truth_csv(path) -> List[TruthRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [TruthRow(r["user_id"], r["home_region_id"], r["destination_region_id"] or None,
                         r["traveled"] == "true", r["in_corridor"] == "true", int(r["n_event_records"]))
                for r in csv.DictReader(fh)]


# -- scenario files -----------------------------------------------------------

_INT_KEYS = ("seed", "cohort_size", "records_min", "records_max", "event_records_min",
             "event_records_max", "chatter_max", "history_days")
_FLOAT_KEYS = ("home_fidelity", "home_sigma_m", "ungeoref_fraction", "event_hour_utc", "event_hour_sd")


def load_scenario(path) -> Tuple[ScenarioSpec, Dict[str, str]]:
    """Read a key=value scenario file.

    Besides the :class:`ScenarioSpec` fields it understands ``regions`` and
    ``corridor`` (GeoJSON paths), ``travel.<origin> = dest:p,...`` rows,
    ``place_side.<scale>`` overrides and the output names ``store`` and
    ``truth``.  Returns the spec and the resolved output names.
    """
    path = Path(path)
    kv = read_kv_file(path)
    base = path.resolve().parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    if "regions" not in kv:
        raise ConfigError(f"{path}: 'regions' is required")
    regions_path = resolve(kv["regions"])
    if not regions_path.is_file():
        raise ConfigError(f"regions file not found: {regions_path}")
    regions = load_regions(regions_path)
    kwargs = {"regions": regions}
    if "corridor" in kv:
        cpath = resolve(kv["corridor"])
        if not cpath.is_file():
            raise ConfigError(f"corridor file not found: {cpath}")
        kwargs["corridor"] = load_regions(cpath)[0]
    travel, sides = {}, dict(PLACE_SIDE_M)
    outputs = {"store": "records.ndjson", "truth": "truth.csv"}
    for key, raw in kv.items():
        try:
            if key in ("regions", "corridor"):
                continue
            if key in outputs:
                outputs[key] = raw
            elif key in _INT_KEYS:
                kwargs[key] = int(raw)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(raw)
            elif key == "scale_mix":
                kwargs[key] = parse_weights(raw)
            elif key == "event_day":
                kwargs[key] = parse_date(raw)
            elif key == "home_weighting":
                kwargs[key] = raw
            elif key.startswith("travel."):
                travel[key[len("travel."):]] = parse_weights(raw)
            elif key.startswith("place_side."):
                sides[PlaceScale.parse(key[len("place_side."):])] = float(raw)
            else:
                raise ConfigError(f"{path}: unknown scenario key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key}: {exc}") from None
    kwargs["travel"] = travel
    kwargs["place_side_m"] = sides
    if "seed" not in kwargs or "cohort_size" not in kwargs:
        raise ConfigError(f"{path}: 'seed' and 'cohort_size' are required")
    try:
        return ScenarioSpec(**kwargs), outputs
    except InvalidArgumentError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# -- the standard demonstration scenario --------------------------------------

GRID_COLS, GRID_ROWS = 5, 4
_WEST, _SOUTH, _CELL_DEG = -112.0, 36.0, 2.0


def standard_regions() -> List[Region]:
    """Twenty 2-degree rectangular regions with fixed, uneven populations."""
    rng = np.random.default_rng(20170821)
    pops = np.round(np.exp(rng.normal(14.0, 0.8, GRID_COLS * GRID_ROWS)), -3).astype(int)
    out = []
    for row in range(GRID_ROWS):
        for col in range(GRID_COLS):
            w = _WEST + col * _CELL_DEG
            s = _SOUTH + row * _CELL_DEG
            ring = [[w, s], [w + _CELL_DEG, s], [w + _CELL_DEG, s + _CELL_DEG], [w, s + _CELL_DEG], [w, s]]
            k = row * GRID_COLS + col
            out.append(Region(f"R{row}{col}", f"Region {row}{col}", (ring,), int(pops[k]),
                              float(round((w + _CELL_DEG / 2) / 15.0))))
    return out


def standard_corridor() -> Region:
    """A 1-degree band running from the north-west to the south-east corner."""
    x0, y0 = _WEST - 0.5, _SOUTH + GRID_ROWS * _CELL_DEG - 0.3
    x1, y1 = _WEST + GRID_COLS * _CELL_DEG + 0.5, _SOUTH + 0.3
    ring = [[x0, y0 + 0.5], [x1, y1 + 0.5], [x1, y1 - 0.5], [x0, y0 - 0.5], [x0, y0 + 0.5]]
    return Region("corridor", "Event corridor", (ring,), 0, None)


def gravity_travel(regions: Sequence[Region], destinations: Sequence[str],
                   stay: float = 0.5) -> Dict[str, Dict[str, float]]:
    """Each origin stays home with ``stay`` and spreads the rest over
    ``destinations`` with weights falling off as 1 / (1 + distance)²."""
    centers = {r.region_id: np.vstack(r.rings).mean(axis=0) for r in regions}
    travel = {}
    for r in regions:
        o = r.region_id
        w = {d: 1.0 / (1.0 + np.hypot(*(centers[o] - centers[d]))) ** 2 for d in destinations if d != o}
        total = sum(w.values())
        row = {d: float((1.0 - stay) * v / total) for d, v in w.items()} if total else {}
        row[o] = row.get(o, 0.0) + (stay if total else 1.0)
        travel[o] = row
    return travel


def standard_scenario(seed: int = 42, cohort_size: int = 500, **overrides) -> ScenarioSpec:
    """Cohort on :func:`standard_regions` with realistic georeference ratios.

    About a quarter of history records carry a georeference; of those roughly
    a fifth are coordinates and the rest places at mixed scales.
    """
    regions = standard_regions()
    corridor = standard_corridor()
    dests = corridor_region_ids(regions, corridor)
    kwargs = dict(
        seed=seed, regions=regions, cohort_size=cohort_size, corridor=corridor,
        records_min=60, records_max=200, home_fidelity=0.8, home_sigma_m=5_000.0,
        ungeoref_fraction=0.7,
        scale_mix={COORDINATE: 0.2, "poi": 0.15, "neighborhood": 0.15, "city": 0.35,
                   "admin": 0.12, "country": 0.03},
        travel=gravity_travel(regions, dests),
    )
    kwargs.update(overrides)
    return ScenarioSpec(**kwargs)


STANDARD_RUN_CONFIG = """\
# pipeline configuration for the standard synthetic scenario
records = records.ndjson
regions = regions.geojson
corridor = corridor.geojson
keywords = eclipse,totality
window_start = 2017-08-18T00:00:00Z
window_end = 2017-08-25T00:00:00Z
day_start = 2017-08-20
day_end = 2017-08-23
alpha = 80
min_evidence = 5
history_cap = 3200
grid_cells = 256
max_scale = city
top_k = 10
seed = 42
"""


def scenario_text(spec: ScenarioSpec, regions_name="regions.geojson",
                  corridor_name="corridor.geojson") -> str:
    lines = [f"seed = {spec.seed}", f"regions = {regions_name}"]
    if spec.corridor is not None:
        lines.append(f"corridor = {corridor_name}")
    for key in ("cohort_size", "records_min", "records_max", "home_fidelity", "home_sigma_m",
                "ungeoref_fraction", "event_hour_utc", "event_hour_sd", "event_records_min",
                "event_records_max", "chatter_max", "history_days", "home_weighting"):
        lines.append(f"{key} = {getattr(spec, key)}")
    lines.append(f"event_day = {spec.event_day.isoformat()}")
    lines.append("scale_mix = " + ",".join(f"{k}:{float(v)!r}" for k, v in spec.scale_mix.items()))
    for origin in sorted(spec.travel):
        row = spec.travel[origin]
        lines.append(f"travel.{origin} = " + ",".join(f"{d}:{float(row[d])!r}" for d in sorted(row)))
    return "\n".join(lines) + "\n"


def write_standard_inputs(out_dir, seed: int = 42, cohort_size: int = 500) -> Dict[str, Path]:
    """Write regions, corridor, a scenario file and a run config for the demo."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = standard_scenario(seed, cohort_size)
    paths = {
        "regions": out / "regions.geojson",
        "corridor": out / "corridor.geojson",
        "scenario": out / "scenario.cfg",
        "config": out / "run.cfg",
    }
    write_regions(paths["regions"], spec.regions)
    write_regions(paths["corridor"], [spec.corridor])
    paths["scenario"].write_text(scenario_text(spec), encoding="utf-8")
    paths["config"].write_text(STANDARD_RUN_CONFIG, encoding="utf-8")
    return paths


def run_config_text(spec: ScenarioSpec, **extra) -> str:
    """Pipeline config matching a scenario's event week and keywords."""
    start, end = spec.event_week
    d = spec.event_day
    lines = [
        "records = records.ndjson",
        "regions = regions.geojson",
        "corridor = corridor.geojson",
        "keywords = eclipse,totality",
        f"window_start = {start}",
        f"window_end = {end}",
        f"day_start = {(d - timedelta(days=1)).isoformat()}",
        f"day_end = {(d + timedelta(days=2)).isoformat()}",
        f"seed = {spec.seed}",
    ]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    return "\n".join(lines) + "\n"


def write_scenario_inputs(spec: ScenarioSpec, out_dir, **config) -> Dict[str, Path]:
    """Generate ``spec`` and write everything a pipeline run needs.

    Returns paths for ``regions``, ``corridor``, ``records``, ``truth`` and
    ``config``; extra keyword arguments become config lines.
    """
    if spec.corridor is None:
        raise InvalidArgumentError("scenario has no corridor")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / fname for name, fname in (
        ("regions", "regions.geojson"), ("corridor", "corridor.geojson"),
        ("records", "records.ndjson"), ("truth", "truth.csv"), ("config", "run.cfg"))}
    write_regions(paths["regions"], spec.regions)
    write_regions(paths["corridor"], [spec.corridor])
    store, truth = generate(spec)
    write_outputs(spec, store, truth, paths["records"], paths["truth"])
    paths["config"].write_text(run_config_text(spec, **config), encoding="utf-8")
    return paths


# -- small scripted scenarios -------------------------------------------------

def _strip_regions(ids: Sequence[str], populations: Sequence[int]) -> List[Region]:
    """Adjacent 1-degree squares in a west-to-east row."""
    out = []
    for k, (rid, pop) in enumerate(zip(ids, populations)):
        w, s = -100.0 + k, 40.0
        ring = [[w, s], [w + 1, s], [w + 1, s + 1], [w, s + 1], [w, s]]
        out.append(Region(rid, rid, (ring,), int(pop), -6.0))
    return out


def _square_corridor(region: Region, margin: float = 0.1) -> Region:
    x0, y0, x1, y1 = region.bbox
    ring = [[x0 + margin, y0 + margin], [x1 - margin, y0 + margin], [x1 - margin, y1 - margin],
            [x0 + margin, y1 - margin], [x0 + margin, y0 + margin]]
    return Region("corridor", "Event corridor", (ring,), 0, None)


def self_share_scenario(self_share: float = 0.65, seed: int = 7, cohort_size: int = 1500,
                        **overrides) -> ScenarioSpec:
    """Destination ``D`` between neighbours ``N1`` and ``N2``.

    Everyone living in ``D`` attends; each neighbour sends the fraction that
    makes the population-weighted share of ``D``'s own residents equal
    ``self_share``.  Populations differ so that the raw-count share does not.
    """
    if not 0.0 < self_share <= 1.0:
        raise InvalidArgumentError("self_share must lie in (0, 1]")
    regions = _strip_regions(["N1", "D", "N2"], [300_000, 200_000, 500_000])
    q = (1.0 / self_share - 1.0) / 2.0
    if q > 1.0:
        raise InvalidArgumentError("self_share too small for two neighbours")
    travel = {"D": {"D": 1.0}, "N1": {"D": q, "N1": 1.0 - q}, "N2": {"D": q, "N2": 1.0 - q}}
    kwargs = dict(seed=seed, regions=regions, cohort_size=cohort_size, corridor=_square_corridor(regions[1]),
                  records_min=30, records_max=80, home_fidelity=0.8, ungeoref_fraction=0.5,
                  travel=travel)
    kwargs.update(overrides)
    return ScenarioSpec(**kwargs)


def redirect_scenarios(seed: int = 11, cohort_size: int = 1200) -> Tuple[ScenarioSpec, ScenarioSpec]:
    """Baseline and event specs for destination ``D`` in a row ``N1 D N2 E``.

    In the baseline ``N1`` sends the most visitors per head to ``D``; in the
    event period ``N1``'s travellers go to ``E`` instead while ``N2`` keeps
    its rate.  Only ``D`` and ``E`` meet the corridor.
    """
    regions = _strip_regions(["N1", "D", "N2", "E"], [250_000, 250_000, 250_000, 250_000])
    corridor_ring = [[-99.0 + 0.1, 40.3], [-96.0 - 0.1, 40.3], [-96.0 - 0.1, 40.7],
                     [-99.0 + 0.1, 40.7], [-99.0 + 0.1, 40.3]]
    # N2 is crossed by the band too, but nobody is sent there
    corridor = Region("corridor", "Event corridor", (corridor_ring,), 0, None)
    base = {"D": {"D": 1.0}, "E": {"E": 1.0},
            "N1": {"D": 0.6, "N1": 0.4}, "N2": {"D": 0.3, "N2": 0.7}}
    event = dict(base, N1={"E": 0.6, "N1": 0.4})
    common = dict(regions=regions, cohort_size=cohort_size, corridor=corridor, records_min=30,
                  records_max=80, ungeoref_fraction=0.5)
    return (ScenarioSpec(seed=seed, travel=base, **common),
            ScenarioSpec(seed=seed + 1, travel=event, **common))


def write_outputs(spec: ScenarioSpec, store: RecordStore, truth, store_path, truth_path) -> None:
    write_ndjson(store_path, store.stream())
    write_truth_csv(truth_path, truth)
