"""Home-region inference from activity surfaces and profile cross-checks."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .geomodel import ProjectedRegion, Region
from .vbkde import ActivitySurface, GridSpec

UNDETERMINED = "undetermined"
DEFAULT_MIN_EVIDENCE = 5


@dataclass(frozen=True)
class HomeEstimate:
    user_id: str
    region_id: str
    zonal_mass: Dict[str, float] = field(default_factory=dict)
    evidence_count: int = 0

    @property
    def determined(self) -> bool:
        return self.region_id != UNDETERMINED

    def top(self, k: int = 3) -> list:
        ranked = sorted(self.zonal_mass.items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked[:k]


class ZoneIndex:
    """Cell-centre membership of every region on one grid.

    A cell whose centre lies on a boundary shared by several regions goes to
    the first of them in input order, so regions that tile the grid split
    its mass exactly once.

    Building the masks is the expensive part of zonal statistics; when many
    surfaces share a grid, build the index once and pass it to
    :func:`infer_home`.
    """

    def __init__(self, grid: GridSpec, regions: Sequence[ProjectedRegion]):
        self.grid = grid
        self.region_ids = [r.region_id for r in regions]
        X, Y = grid.cell_centers()
        claimed = np.zeros(X.size, dtype=bool)
        self.cells = []
        for r in regions:
            idx = np.flatnonzero(r.contains(X, Y).ravel() & ~claimed)
            claimed[idx] = True
            self.cells.append(idx)

    def zonal_mass(self, surface: ActivitySurface) -> Dict[str, float]:
        if surface.grid != self.grid:
            raise InvalidArgumentError("surface grid differs from the zone index grid")
        values = np.nan_to_num(surface.values).ravel()
        area = self.grid.cell_area
        return {rid: float(values[idx].sum() * area) for rid, idx in zip(self.region_ids, self.cells)}


def infer_home(surface: ActivitySurface, regions: Sequence[ProjectedRegion], *,
               user_id: str = "", evidence_count: Optional[int] = None,
               min_evidence: int = DEFAULT_MIN_EVIDENCE,
               zone_index: Optional[ZoneIndex] = None) -> HomeEstimate:
    """Region holding the largest share of the surface's probability mass.

    Ties go to the lexicographically smallest region id.  The estimate is
    ``undetermined`` when ``evidence_count`` is below ``min_evidence`` or no
    region receives any mass.
    """
    if not surface.normalized:
        raise InvalidArgumentError("infer_home needs a normalized surface")
    index = zone_index if zone_index is not None else ZoneIndex(surface.grid, regions)
    zonal = index.zonal_mass(surface)
    evidence = int(evidence_count) if evidence_count is not None else 0
    if evidence_count is not None and evidence < min_evidence:
        return HomeEstimate(user_id, UNDETERMINED, zonal, evidence)
    best = min(zonal.items(), key=lambda kv: (-kv[1], kv[0]), default=None)
    if best is None or best[1] <= 0.0:
        return HomeEstimate(user_id, UNDETERMINED, zonal, evidence)
    return HomeEstimate(user_id, best[0], zonal, evidence)


def write_estimates_csv(path, estimates: Iterable[HomeEstimate], top_k: int = 3) -> None:
    header = ["user_id", "region_id", "evidence_count"]
    for k in range(1, top_k + 1):
        header += [f"top{k}_region", f"top{k}_mass"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for est in estimates:
            row = [est.user_id, est.region_id, est.evidence_count]
            top = est.top(top_k)
            for k in range(top_k):
                row += [top[k][0], repr(top[k][1])] if k < len(top) else ["", ""]
            w.writerow(row)


def read_estimates_csv(path) -> List[HomeEstimate]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            zonal = {}
            k = 1
            while f"top{k}_region" in row:
                if row[f"top{k}_region"]:
                    zonal[row[f"top{k}_region"]] = float(row[f"top{k}_mass"])
                k += 1
            out.append(HomeEstimate(row["user_id"], row["region_id"], zonal,
                                    int(row["evidence_count"])))
    return out


# -- profile locations ------------------------------------------------------

def default_gazetteer(regions: Iterable[Region]) -> Dict[str, str]:
    """Aliases from region names and region ids."""
    gaz = {}
    for r in regions:
        gaz[r.name.strip().lower()] = r.region_id
        gaz[r.region_id.strip().lower()] = r.region_id
    return gaz


def load_gazetteer(path) -> Dict[str, str]:
    """Two-column CSV ``alias,region_id``; a header row is optional."""
    gaz = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            if i == 0 and [c.strip().lower() for c in row[:2]] == ["alias", "region_id"]:
                continue
            if len(row) < 2:
                raise InvalidArgumentError(f"{path}: line {i + 1} needs alias and region_id")
            gaz[row[0].strip().lower()] = row[1].strip()
    return gaz


_TRAILING_ABBREV = re.compile(r",\s*([A-Za-z]{2})\s*$")
_UPPER_TOKEN = re.compile(r"\b([A-Z]{2})\b")


def _contains_phrase(text: str, phrase: str) -> bool:
    """``phrase`` occurs in ``text`` with no word character on either side."""
    return re.search(r"(?<!\w)" + re.escape(phrase) + r"(?!\w)", text) is not None


def match_profile_location(profile_text: str, regions: Optional[Sequence[Region]],
                           gazetteer: Mapping[str, str]) -> Optional[str]:
    """Map a free-text profile location to a region id, or ``None``.

    Tried in order: a trailing ``", XX"`` abbreviation, the longest alias of
    three or more characters found as a whole-word phrase, then a bare
    upper-case two-letter token.
    """
    text = (profile_text or "").strip()
    if not text:
        return None
    valid = None if regions is None else {r.region_id for r in regions}

    def ok(rid):
        return rid is not None and (valid is None or rid in valid)

    m = _TRAILING_ABBREV.search(text)
    if m:
        rid = gazetteer.get(m.group(1).lower())
        if ok(rid):
            return rid
    low = text.lower()
    hits = [(len(alias), rid) for alias, rid in gazetteer.items()
            if len(alias) > 2 and ok(rid) and _contains_phrase(low, alias)]
    if hits:
        return min(hits, key=lambda t: (-t[0], t[1]))[1]
    for tok in _UPPER_TOKEN.findall(text):
        rid = gazetteer.get(tok.lower())
        if ok(rid):
            return rid
    return None


@dataclass(frozen=True)
class ProfileMatch:
    user_id: str
    profile_text: str
    matched_region_id: Optional[str] = None
    agrees_with_estimate: Optional[bool] = None


def validate_profiles(profiles: Mapping[str, str], estimates: Iterable[HomeEstimate],
                      regions: Sequence[Region], gazetteer: Mapping[str, str]) -> List[ProfileMatch]:
    by_user = {e.user_id: e for e in estimates}
    out = []
    for uid in sorted(profiles):
        text = profiles[uid]
        rid = match_profile_location(text, regions, gazetteer)
        est = by_user.get(uid)
        agrees = None
        if rid is not None and est is not None and est.determined:
            agrees = rid == est.region_id
        out.append(ProfileMatch(uid, text, rid, agrees))
    return out


def agreement_rate(estimates: Iterable[HomeEstimate], matches: Iterable[ProfileMatch]) -> Optional[float]:
    """Share of comparable users whose profile region equals the estimate.

    Returns ``None`` when no user has both a determined estimate and a
    matched profile region.
    """
    by_user = {e.user_id: e for e in estimates if e.determined}
    comparable = agree = 0
    for m in matches:
        est = by_user.get(m.user_id)
        if est is None or m.matched_region_id is None:
            continue
        comparable += 1
        agree += m.matched_region_id == est.region_id
    return agree / comparable if comparable else None


def load_profiles(path) -> Dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["user_id"]: row.get("profile_text") or "" for row in csv.DictReader(fh)}


def write_profile_matches_csv(path, matches: Iterable[ProfileMatch]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "profile_text", "matched_region_id", "agrees_with_estimate"])
        for m in matches:
            agrees = "" if m.agrees_with_estimate is None else str(m.agrees_with_estimate).lower()
            w.writerow([m.user_id, m.profile_text, m.matched_region_id or "", agrees])
