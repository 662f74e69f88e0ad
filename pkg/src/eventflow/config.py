"""Flat ``key = value`` configuration files.

Blank lines and lines starting with ``#`` are ignored.  Relative paths are
resolved against the directory holding the file.
"""

from __future__ import annotations

import calendar
from dataclasses import dataclass, fields
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple

from .errors import ConfigError
from .geomodel import PlaceScale


def parse_kv_text(text: str, source: str = "<config>") -> Dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value.strip()
    return out


def read_kv_file(path) -> Dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_kv_text(text, str(path))


def parse_bool(value: str) -> bool:
    low = value.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def parse_utc(value: str) -> int:
    """Epoch seconds from an integer or an ISO-8601 timestamp (UTC if naive)."""
    value = value.strip()
    try:
        return int(value)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError:
        raise ConfigError(f"not a timestamp: {value!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return calendar.timegm(dt.utctimetuple())


def parse_date(value: str) -> date:
    try:
        return date.fromisoformat(value.strip())
    except ValueError:
        raise ConfigError(f"not a date: {value!r}") from None


def parse_list(value: str) -> Tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


def parse_weights(value: str) -> Dict[str, float]:
    """``a:0.5,b:0.5`` -> ``{'a': 0.5, 'b': 0.5}``"""
    out = {}
    for item in parse_list(value):
        if ":" not in item:
            raise ConfigError(f"expected name:weight, got {item!r}")
        k, v = item.rsplit(":", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise ConfigError(f"bad weight in {item!r}") from None
    return out


# keys accepted by PipelineConfig, with a short description for --help output
PIPELINE_KEYS = {
    "records": "NDJSON record store",
    "regions": "GeoJSON region set (home/origin regions)",
    "zones": "GeoJSON hotspot zones (defaults to regions)",
    "corridor": "GeoJSON file holding the event corridor polygon",
    "bounding_region": "optional GeoJSON region limiting the event filter",
    "gazetteer": "optional alias,region_id CSV",
    "profiles": "optional user_id,profile_text CSV",
    "baseline_flows": "optional flows.csv from a regular-period run",
    "out_dir": "output directory",
    "keywords": "comma-separated event keywords",
    "window_start": "event window start (ISO UTC or epoch seconds), inclusive",
    "window_end": "event window end, exclusive",
    "day_start": "first local date of the temporal histogram",
    "day_end": "last local date of the temporal histogram",
    "alpha": "bandwidth scaling constant in m^2",
    "bandwidth_floor": "minimum base bandwidth in m",
    "min_evidence": "minimum georeferenced records for a home estimate",
    "history_cap": "records retrieved per user",
    "grid_cells": "cells along the longer side of the home-inference grid",
    "grid_cap": "maximum cells in any raster",
    "max_scale": "coarsest place scale kept for hotspots",
    "destinations": "comma-separated destination region ids (default: regions meeting the corridor)",
    "top_k": "origins listed in flow comparisons",
    "seed": "recorded in the manifest",
    "threads": "worker threads for per-user stages",
    "figures": "render PNG figures next to the CSV outputs",
}


@dataclass
class PipelineConfig:
    records: Optional[Path] = None
    regions: Optional[Path] = None
    zones: Optional[Path] = None
    corridor: Optional[Path] = None
    bounding_region: Optional[Path] = None
    gazetteer: Optional[Path] = None
    profiles: Optional[Path] = None
    baseline_flows: Optional[Path] = None
    out_dir: Path = Path("out")
    keywords: Tuple[str, ...] = ("eclipse", "totality")
    window_start: Optional[int] = None
    window_end: Optional[int] = None
    day_start: Optional[date] = None
    day_end: Optional[date] = None
    alpha: float = 80.0
    bandwidth_floor: float = 100.0
    min_evidence: int = 5
    history_cap: int = 3200
    grid_cells: int = 256
    grid_cap: int = 2048 * 2048
    max_scale: PlaceScale = PlaceScale.CITY
    destinations: Tuple[str, ...] = ()
    top_k: int = 10
    seed: int = 0
    threads: int = 1
    figures: bool = True

    _PATHS = ("records", "regions", "zones", "corridor", "bounding_region", "gazetteer",
              "profiles", "baseline_flows", "out_dir")

    @classmethod
    def from_mapping(cls, values: Mapping[str, str], base_dir=None) -> "PipelineConfig":
        cfg = cls()
        if base_dir is not None:
            # the default output directory sits next to the config too
            cfg.out_dir = Path(base_dir) / cfg.out_dir
        cfg.update(values, base_dir)
        return cfg

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        return cls.from_mapping(read_kv_file(path), Path(path).resolve().parent)

    def update(self, values: Mapping[str, str], base_dir=None) -> None:
        base = Path(base_dir) if base_dir is not None else None
        for key, raw in values.items():
            if key not in PIPELINE_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            raw = str(raw)
            try:
                if key in self._PATHS:
                    p = Path(raw)
                    value = p if (base is None or p.is_absolute()) else base / p
                elif key == "keywords" or key == "destinations":
                    value = parse_list(raw)
                elif key in ("window_start", "window_end"):
                    value = parse_utc(raw)
                elif key in ("day_start", "day_end"):
                    value = parse_date(raw)
                elif key in ("alpha", "bandwidth_floor"):
                    value = float(raw)
                elif key == "max_scale":
                    value = PlaceScale.parse(raw)
                elif key == "figures":
                    value = parse_bool(raw)
                else:
                    value = int(raw)
            except (ValueError, ConfigError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
            setattr(self, key, value)

    def validate(self, required=("records", "regions", "corridor")) -> None:
        for key in required:
            path = getattr(self, key)
            if path is None:
                raise ConfigError(f"config key {key!r} is required")
        for key in self._PATHS:
            path = getattr(self, key)
            if key != "out_dir" and path is not None and not Path(path).is_file():
                raise ConfigError(f"{key} file not found: {path}")
        if self.window_start is None or self.window_end is None:
            raise ConfigError("window_start and window_end are required")
        if self.window_start > self.window_end:
            raise ConfigError("window_start is after window_end")
        if not self.keywords:
            raise ConfigError("keywords must not be empty")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not self.bandwidth_floor > 0:
            raise ConfigError("bandwidth_floor must be positive")
        if self.min_evidence < 0 or self.history_cap < 1:
            raise ConfigError("min_evidence must be >= 0 and history_cap >= 1")
        if not 8 <= self.grid_cells <= 2048:
            raise ConfigError("grid_cells must lie in [8, 2048]")
        if self.grid_cap < 64:
            raise ConfigError("grid_cap must be at least 64")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if (self.day_start is None) != (self.day_end is None):
            raise ConfigError("day_start and day_end go together")

    def as_dict(self) -> Dict[str, object]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Path):
                v = str(v)
            elif isinstance(v, date):
                v = v.isoformat()
            elif isinstance(v, PlaceScale):
                v = v.label
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out
