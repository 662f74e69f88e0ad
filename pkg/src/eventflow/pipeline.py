"""End-to-end orchestration of the analysis stages.

A :class:`Pipeline` loads its inputs once and computes each stage on first
use, so single-stage CLI subcommands and the full ``run`` share one code
path.  Stage failures are re-raised as :class:`StageError` naming the stage.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List

import numpy as np

from . import flows as flows_mod
from . import inference, ingest, report, stats, vbkde
from .config import PipelineConfig
from .errors import (
    DataError,
    EmptyFlowTableError,
    EventFlowError,
    InvalidArgumentError,
    ResourceLimitError,
)
from .geomodel import (
    GeoRecord,
    Projection,
    ProjectedRegion,
    load_regions,
    project_regions,
    regions_projection,
    representative_latlon,
)

log = logging.getLogger(__name__)


class StageError(EventFlowError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Pipeline:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out_dir = Path(cfg.out_dir)
        self.counts: Dict[str, object] = {}
        self.timings: Dict[str, float] = {}
        self._cache: Dict[str, object] = {}

    # -- plumbing ------------------------------------------------------------

    def _stage(self, name, fn):
        if name in self._cache:
            return self._cache[name]
        log.info("stage %s ...", name)
        t0 = time.perf_counter()
        try:
            result = fn()
        except StageError:
            raise
        except (EventFlowError, OSError, ValueError) as exc:
            raise StageError(name, exc) from exc
        self.timings[name] = round(time.perf_counter() - t0, 6)
        self._cache[name] = result
        return result

    def _path(self, name) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    # -- inputs --------------------------------------------------------------

    @property
    def store(self) -> ingest.RecordStore:
        def load():
            store = ingest.RecordStore.from_ndjson(self.cfg.records)
            self.counts["records_read"] = store.report.n_read
            self.counts["malformed_lines"] = store.report.n_malformed
            return store
        return self._stage("load-records", load)

    @property
    def regions(self):
        return self._stage("load-regions", lambda: load_regions(self.cfg.regions))

    @property
    def zones(self):
        if self.cfg.zones is None:
            return self.regions
        return self._stage("load-zones", lambda: load_regions(self.cfg.zones))

    @property
    def corridor(self):
        def load():
            found = load_regions(self.cfg.corridor)
            if not found:
                raise InvalidArgumentError(f"{self.cfg.corridor} holds no corridor feature")
            return found[0]
        return self._stage("load-corridor", load)

    @property
    def projection(self):
        return self._stage("projection", lambda: regions_projection(self.regions))

    @property
    def projected_regions(self) -> List[ProjectedRegion]:
        return self._stage("project-regions", lambda: project_regions(self.regions, self.projection))

    # -- stages --------------------------------------------------------------

    def filter_spec(self) -> ingest.FilterSpec:
        bounding = load_regions(self.cfg.bounding_region)[0] if self.cfg.bounding_region else None
        return ingest.FilterSpec(self.cfg.keywords, self.cfg.window_start, self.cfg.window_end, bounding)

    def event_records(self) -> List[GeoRecord]:
        def run():
            recs = list(ingest.filter_event_records(self.store, self.filter_spec()))
            self.counts["event_records"] = len(recs)
            return recs
        return self._stage("filter", run)

    def event_users(self) -> List[str]:
        def run():
            users = sorted(ingest.select_event_users(self.event_records(), self.corridor))
            self.counts["event_users"] = len(users)
            if not users:
                raise DataError("no event users: no filtered record lies inside the corridor")
            return users
        return self._stage("select-users", run)

    def histories(self) -> Dict[str, List[GeoRecord]]:
        def run():
            hist = {u: ingest.fetch_history(self.store, u, self.cfg.history_cap) for u in self.event_users()}
            self.counts["users_with_history"] = sum(1 for v in hist.values() if v)
            self.counts["users_empty_history"] = sum(1 for v in hist.values() if not v)
            self.counts["history_records"] = sum(len(v) for v in hist.values())
            return hist
        return self._stage("fetch-histories", run)

    def history_stats(self):
        return self._stage("history-stats", lambda: ingest.history_stats(self.histories()))

    def analysis_grid(self) -> vbkde.GridSpec:
        """Grid over the region set, ``grid_cells`` cells along its longer side."""
        def run():
            boxes = np.vstack([r.bbox for r in self.projected_regions])
            x0, y0 = boxes[:, 0].min(), boxes[:, 1].min()
            x1, y1 = boxes[:, 2].max(), boxes[:, 3].max()
            cell = max(x1 - x0, y1 - y0) / self.cfg.grid_cells
            grid = vbkde.GridSpec.covering(float(x0), float(y0), float(x1), float(y1), float(cell))
            if grid.n_cells > self.cfg.grid_cap:
                raise ResourceLimitError(f"analysis grid of {grid.n_cells} cells exceeds grid_cap")
            return grid
        return self._stage("analysis-grid", run)

    def _estimate(self, user: str, records, grid, index) -> inference.HomeEstimate:
        geo = [r for r in records if r.georef is not None]
        if not geo:
            return inference.HomeEstimate(user, inference.UNDETERMINED, {}, 0)
        try:
            surface = vbkde.build_surface(geo, self.projection, grid, alpha=self.cfg.alpha,
                                          floor=self.cfg.bandwidth_floor, max_cells=self.cfg.grid_cap)
        except InvalidArgumentError:
            # no kernel mass on the analysis grid
            return inference.HomeEstimate(user, inference.UNDETERMINED, {}, len(geo))
        return inference.infer_home(surface, self.projected_regions, user_id=user,
                                    evidence_count=len(geo), min_evidence=self.cfg.min_evidence,
                                    zone_index=index)

    def home_estimates(self) -> List[inference.HomeEstimate]:
        def run():
            hist = self.histories()
            grid = self.analysis_grid()
            index = inference.ZoneIndex(grid, self.projected_regions)
            users = sorted(hist)
            if self.cfg.threads > 1:
                with ThreadPoolExecutor(max_workers=self.cfg.threads) as pool:
                    out = list(pool.map(lambda u: self._estimate(u, hist[u], grid, index), users))
            else:
                out = [self._estimate(u, hist[u], grid, index) for u in users]
            self.counts["homes_determined"] = sum(1 for e in out if e.determined)
            self.counts["homes_undetermined"] = sum(1 for e in out if not e.determined)
            return out
        return self._stage("infer-home", run)

    def hotspots(self):
        def run():
            zc = stats.count_by_zone(self.event_records(), self.zones, self.cfg.max_scale)
            adjacency = stats.contiguity(self.zones)
            raw = stats.gi_star(zc, adjacency, use_rate=False)
            rate = stats.gi_star(zc, adjacency, use_rate=True)
            self.counts["hotspot_zones"] = len(zc.region_ids)
            self.counts["hotspot_records_joined"] = int(sum(zc.raw_count.values()))
            self.counts["hotspot_records_excluded"] = zc.excluded
            self.counts["hotspot_records_residual"] = zc.residual
            return zc, raw, rate
        return self._stage("hotspot", run)

    def day_range(self):
        if self.cfg.day_start is not None:
            return self.cfg.day_start, self.cfg.day_end
        lo = datetime.fromtimestamp(self.cfg.window_start, tz=timezone.utc).date()
        hi = datetime.fromtimestamp(max(self.cfg.window_end - 1, self.cfg.window_start), tz=timezone.utc).date()
        return lo, hi

    def temporal(self) -> stats.TemporalHistogram:
        def run():
            hist = stats.temporal_histogram(self.event_records(), self.corridor, self.zones, self.day_range())
            self.counts["histogram_total"] = hist.total()
            self.counts["histogram_offset_fallback"] = hist.diagnostics["offset_fallback"]
            return hist
        return self._stage("temporal", run)

    def observed_at(self) -> Dict[str, List[str]]:
        """Destination region -> event users with an in-corridor event record there."""
        def run():
            proj = self.projection
            corridor = ProjectedRegion.from_region(self.corridor, proj)
            users = set(self.event_users())
            recs = [r for r in self.event_records() if r.georef is not None and r.user_id in users]
            seen: Dict[str, set] = {r.region_id: set() for r in self.regions}
            if recs:
                latlon = np.array([representative_latlon(r.georef) for r in recs])
                x, y = proj.forward(latlon[:, 0], latlon[:, 1])
                inside = corridor.contains(x, y)
                for pr in self.projected_regions:
                    hit = inside & pr.contains(x, y)
                    seen[pr.region_id].update(recs[k].user_id for k in np.flatnonzero(hit))
            wanted = self.cfg.destinations or tuple(rid for rid in sorted(seen) if seen[rid])
            unknown = [d for d in wanted if d not in seen]
            if unknown:
                raise InvalidArgumentError(f"unknown destination region(s): {', '.join(unknown)}")
            return {d: sorted(seen[d]) for d in wanted}
        return self._stage("observe-destinations", run)

    def flow_tables(self) -> List[flows_mod.FlowTable]:
        def run():
            by_user = {e.user_id: e for e in self.home_estimates()}
            tables = []
            for dest, users in self.observed_at().items():
                try:
                    tables.append(flows_mod.build_flow_table([by_user[u] for u in users], dest, self.regions))
                except EmptyFlowTableError as exc:
                    log.warning("%s", exc)
            self.counts["flow_destinations"] = len(tables)
            self.counts["flow_observed_users"] = {t.destination_region_id: t.total_users for t in tables}
            return tables
        return self._stage("flows", run)

    def comparisons(self):
        def run():
            if self.cfg.baseline_flows is None:
                return {}
            baseline = flows_mod.read_flow_csv(self.cfg.baseline_flows)
            out = {}
            for table in self.flow_tables():
                base = baseline.get(table.destination_region_id)
                if base is not None:
                    out[table.destination_region_id] = flows_mod.compare_flows(base, table, self.cfg.top_k)
            self.counts["flow_comparisons"] = len(out)
            return out
        return self._stage("compare-flows", run)

    def profile_matches(self):
        def run():
            if self.cfg.profiles is None:
                return [], None
            gaz = (inference.load_gazetteer(self.cfg.gazetteer) if self.cfg.gazetteer
                   else inference.default_gazetteer(self.regions))
            profiles = inference.load_profiles(self.cfg.profiles)
            est = self.home_estimates()
            matches = inference.validate_profiles(profiles, est, self.regions, gaz)
            rate = inference.agreement_rate(est, matches)
            self.counts["profiles_matched"] = sum(1 for m in matches if m.matched_region_id)
            self.counts["profile_agreement_rate"] = rate
            return matches, rate
        return self._stage("validate-profiles", run)

    # -- writers ---------------------------------------------------------------

    def write_event_records(self):
        ingest.write_ndjson(self._path("event_records.ndjson"), self.event_records())

    def write_event_users(self):
        with open(self._path("event_users.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("user_id\n")
            for u in self.event_users():
                fh.write(f"{u}\n")

    def write_histories(self):
        hist = self.histories()
        ingest.write_ndjson(self._path("histories.ndjson"), (r for u in sorted(hist) for r in hist[u]))

    def write_history_stats(self):
        per_user, aggregate = self.history_stats()
        with open(self._path("history_stats.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("user_id," + ",".join(ingest.HISTORY_COLUMNS) + "\n")
            for u, s in per_user.items():
                row = s.as_row()
                fh.write(u + "," + ",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                                            for c in ingest.HISTORY_COLUMNS) + "\n")
        with open(self._path("history_summary.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("statistic," + ",".join(ingest.HISTORY_COLUMNS) + "\n")
            for name, row in aggregate.items():
                fh.write(name + "," + ",".join(repr(row[c]) for c in ingest.HISTORY_COLUMNS) + "\n")

    def write_home_estimates(self):
        inference.write_estimates_csv(self._path("home_estimates.csv"), self.home_estimates())

    def write_hotspots(self):
        zc, raw, rate = self.hotspots()
        stats.write_zone_counts_csv(self._path("zone_counts.csv"), zc)
        stats.write_hotspots_csv(self._path("hotspots_raw.csv"), raw)
        stats.write_hotspots_csv(self._path("hotspots_rate.csv"), rate)
        if self.cfg.figures:
            report.plot_hotspots(raw, rate, self._figure("hotspots.png"))

    def write_temporal(self):
        hist = self.temporal()
        stats.write_histogram_csv(self._path("temporal.csv"), hist)
        if self.cfg.figures:
            report.plot_temporal(hist, self._figure("temporal.png"))

    def write_flows(self):
        tables = self.flow_tables()
        flows_mod.write_flow_csv(self._path("flows.csv"), tables)
        if self.cfg.figures:
            report.plot_flow_shares(tables, self._figure("flows.png"), self.cfg.top_k)

    def write_comparisons(self):
        comps = self.comparisons()
        if not comps:
            return
        with open(self._path("flow_comparison.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("destination,origin,share_baseline,share_event,share_delta,rank_baseline,rank_event\n")
            for dest, rows in comps.items():
                for r in rows:
                    fh.write(f"{dest},{r.origin},{r.share_baseline!r},{r.share_event!r},"
                             f"{r.share_delta!r},{r.rank_baseline},{r.rank_event}\n")
                if self.cfg.figures:
                    report.plot_comparison(rows, dest, self._figure(f"comparison_{dest}.png"))

    def write_profiles(self):
        matches, rate = self.profile_matches()
        if self.cfg.profiles is not None:
            inference.write_profile_matches_csv(self._path("profile_matches.csv"), matches)

    def _figure(self, name) -> Path:
        d = self.out_dir / "figures"
        d.mkdir(parents=True, exist_ok=True)
        return d / name

    def manifest(self) -> dict:
        inputs = {}
        for key in PipelineConfig._PATHS:
            p = getattr(self.cfg, key)
            if key == "out_dir":
                continue
            if p is not None:
                digest = _sha256(p) if Path(p).is_file() else None
                inputs[key] = {"name": Path(p).name, "sha256": digest}
        # paths and execution knobs stay out so reruns elsewhere match byte for byte
        params = {k: v for k, v in self.cfg.as_dict().items()
                  if k not in PipelineConfig._PATHS and k not in ("threads", "figures")}
        return {"inputs": inputs, "parameters": params, "counts": self.counts,
                "stages": list(self.timings)}

    def write_manifest(self):
        with open(self._path("manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=False)
            fh.write("\n")
        with open(self._path("timings.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump({"threads": self.cfg.threads, "wall_seconds": self.timings}, fh, indent=2)
            fh.write("\n")

    def run(self) -> dict:
        """Execute every stage and write all outputs plus the manifest."""
        try:
            self.write_event_records()
            self.write_event_users()
            self.write_histories()
            self.write_history_stats()
            self.write_home_estimates()
            self.write_hotspots()
            self.write_temporal()
            self.write_flows()
            self.write_comparisons()
            self.write_profiles()
        finally:
            self.write_manifest()
        return self.manifest()

    # -- single-user surfaces --------------------------------------------------

    def user_surfaces(self, user: str):
        """Fixed- and variable-bandwidth surfaces for one user, each on its own auto grid.

        A grid sized for the widest place kernel is usually too coarse for the
        fixed kernels to reach any cell centre, so the two do not share one.
        """
        hist = ingest.fetch_history(self.store, user, self.cfg.history_cap)
        geo = [r for r in hist if r.georef is not None]
        if not geo:
            raise DataError(f"user {user!r} has no georeferenced records in the store")
        lat, lon = np.array([representative_latlon(r.georef) for r in geo]).mean(axis=0)
        proj = Projection(float(lat), float(lon))
        out = []
        for mode in ("fixed", "variable"):
            kernels = vbkde.kernel_set(geo, proj, self.cfg.alpha, mode, self.cfg.bandwidth_floor)
            grid = vbkde.auto_grid(kernels)
            if grid.n_cells > self.cfg.grid_cap:
                raise ResourceLimitError(f"{mode} surface grid of {grid.n_cells} cells exceeds grid_cap")
            out.append(vbkde.build_surface(geo, proj, grid, alpha=self.cfg.alpha, mode=mode,
                                           floor=self.cfg.bandwidth_floor, max_cells=self.cfg.grid_cap))
        return out[0], out[1], proj
