"""Population-calibrated origin shares per destination and period comparisons."""

from __future__ import annotations

import csv
import warnings
from collections import Counter
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping

from .errors import EmptyFlowTableError, InvalidArgumentError
from .inference import HomeEstimate


@dataclass(frozen=True)
class FlowRow:
    raw_count: int
    weight: float
    share: float


@dataclass
class FlowTable:
    destination_region_id: str
    rows: Dict[str, FlowRow]
    total_users: int
    undetermined: int = 0
    zero_population: List[str] = field(default_factory=list)

    def shares(self) -> Dict[str, float]:
        return {o: r.share for o, r in self.rows.items()}

    def ranks(self) -> Dict[str, int]:
        return dense_ranks(self.shares())

    @property
    def coverage(self) -> float:
        """Fraction of observed users whose home was determined."""
        return 1.0 - self.undetermined / self.total_users if self.total_users else 0.0


def dense_ranks(shares: Mapping[str, float]) -> Dict[str, int]:
    """Dense ranks of shares, largest first (equal shares share a rank)."""
    distinct = sorted(set(shares.values()), reverse=True)
    level = {v: k + 1 for k, v in enumerate(distinct)}
    return {o: level[s] for o, s in shares.items()}


def _populations(populations) -> Dict[str, int]:
    if isinstance(populations, Mapping):
        return {str(k): int(v) for k, v in populations.items()}
    return {r.region_id: int(r.population) for r in populations}


def build_flow_table(estimates: Iterable[HomeEstimate], destination: str, populations) -> FlowTable:
    """Per-capita weighted origin shares for the users observed at ``destination``.

    ``populations`` is a region set or a ``region_id -> population`` mapping.
    Undetermined homes are counted but left out of the shares; origins with
    zero or unknown population are dropped and listed in ``zero_population``.
    """
    pops = _populations(populations)
    estimates = list(estimates)
    determined = [e for e in estimates if e.determined]
    counts = Counter(e.region_id for e in determined)
    weights = {}
    zero_pop = []
    for origin in sorted(counts):
        pop = pops.get(origin, 0)
        if pop <= 0:
            zero_pop.append(origin)
            continue
        # counts and populations are integers: keep the ratios exact and round once
        weights[origin] = Fraction(counts[origin], pop)
    if zero_pop:
        warnings.warn(f"flows to {destination}: {len(zero_pop)} origin(s) without population dropped",
                      stacklevel=2)
    total = sum(weights.values())
    if not total > 0:
        raise EmptyFlowTableError(f"no weighted origins for destination {destination}")
    rows = {o: FlowRow(counts[o], float(w), float(w / total)) for o, w in weights.items()}
    return FlowTable(destination, rows, len(estimates), len(estimates) - len(determined), zero_pop)


@dataclass(frozen=True)
class ComparisonRow:
    origin: str
    share_baseline: float
    share_event: float
    share_delta: float
    rank_baseline: int
    rank_event: int


def compare_flows(baseline: FlowTable, event: FlowTable, top_k: int = 10) -> List[ComparisonRow]:
    """Align two flow tables for one destination and rank origins in both.

    Returns the ``top_k`` origins by event share plus any origin in the
    baseline's ``top_k``, ordered by event rank then origin id.  Ranks are
    dense over the union of origins, with absent origins at share 0.
    """
    if baseline.destination_region_id != event.destination_region_id:
        raise InvalidArgumentError(
            f"destination mismatch: {baseline.destination_region_id} vs {event.destination_region_id}")
    origins = sorted(set(baseline.rows) | set(event.rows))
    sb = {o: baseline.rows[o].share if o in baseline.rows else 0.0 for o in origins}
    se = {o: event.rows[o].share if o in event.rows else 0.0 for o in origins}
    rb, re_ = dense_ranks(sb), dense_ranks(se)

    def top(shares):
        return [o for o in sorted(origins, key=lambda o: (-shares[o], o))[:top_k]]

    keep = set(top(se)) | set(top(sb))
    ordered = sorted(keep, key=lambda o: (re_[o], o))
    return [ComparisonRow(o, sb[o], se[o], se[o] - sb[o], rb[o], re_[o]) for o in ordered]


def write_flow_csv(path, tables: Iterable[FlowTable]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["destination", "origin", "raw_count", "weight", "share", "rank"])
        for t in tables:
            ranks = t.ranks()
            for o in sorted(t.rows, key=lambda o: (ranks[o], o)):
                r = t.rows[o]
                w.writerow([t.destination_region_id, o, r.raw_count, repr(r.weight), repr(r.share), ranks[o]])


def read_flow_csv(path) -> Dict[str, FlowTable]:
    """Flow tables keyed by destination (coverage fields are not stored)."""
    rows: Dict[str, Dict[str, FlowRow]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.setdefault(row["destination"], {})[row["origin"]] = FlowRow(
                int(row["raw_count"]), float(row["weight"]), float(row["share"]))
    return {d: FlowTable(d, r, sum(x.raw_count for x in r.values())) for d, r in rows.items()}


def write_comparison_csv(path, destination: str, rows: Iterable[ComparisonRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["destination", "origin", "share_baseline", "share_event", "share_delta",
                    "rank_baseline", "rank_event"])
        for r in rows:
            w.writerow([destination, r.origin, repr(r.share_baseline), repr(r.share_event),
                        repr(r.share_delta), r.rank_baseline, r.rank_event])
