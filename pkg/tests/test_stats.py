import calendar
import warnings
from datetime import date, datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eventflow.errors import NoVarianceError
from eventflow.geomodel import GeoRecord, PlaceScale
from eventflow.stats import (
    NOT_SIGNIFICANT,
    ZoneCounts,
    classify_z,
    contiguity,
    count_by_zone,
    gi_star,
    temporal_histogram,
)

import oracles
from conftest import coord_rec, place_rec, region


def grid_zones(n_rows, n_cols, size=1.0, population=1000, utc_offset=None):
    return [region(f"Z{r:02d}{c:02d}", c * size, r * size, size, size, population, utc_offset)
            for r in range(n_rows) for c in range(n_cols)]


def lattice_adjacency(n_rows, n_cols):
    """Queen neighbours on a lattice, built by index arithmetic."""
    adj = {}
    for r in range(n_rows):
        for c in range(n_cols):
            adj[f"Z{r:02d}{c:02d}"] = {f"Z{r + dr:02d}{c + dc:02d}"
                                       for dr in (-1, 0, 1) for dc in (-1, 0, 1)
                                       if (dr or dc) and 0 <= r + dr < n_rows and 0 <= c + dc < n_cols}
    return adj


# -- zone counts ----------------------------------------------------------------------

def test_count_by_zone_rules():
    zones = [region("A", 0, 0, 1, 1), region("B", 1, 0, 1, 1)]
    recs = [coord_rec("1", 0.5, 0.5), coord_rec("2", 0.5, 1.5), coord_rec("3", 0.2, 1.2),
            place_rec("4", 0.1, 0.1, 0.1, PlaceScale.CITY),
            place_rec("5", 0.1, 0.1, 0.5, PlaceScale.ADMIN),
            coord_rec("6", 5.0, 5.0),
            GeoRecord("7", "u", 0, "no georef")]
    zc = count_by_zone(recs, zones, PlaceScale.CITY)
    assert zc.raw_count == {"A": 2, "B": 2}
    assert zc.excluded == 2
    assert zc.residual == 1


def test_shared_boundary_point_counted_once():
    zones = [region("A", 0, 0, 1, 1), region("B", 1, 0, 1, 1)]
    zc = count_by_zone([coord_rec("1", 0.5, 1.0)], zones)
    assert sum(zc.raw_count.values()) == 1


def test_contiguity_matches_lattice():
    zones = grid_zones(4, 5)
    assert contiguity(zones) == lattice_adjacency(4, 5)


def test_contiguity_tolerance():
    zones = [region("A", 0, 0, 1, 1), region("B", 1.0 + 5e-7, 0, 1, 1), region("C", 2.1, 0, 1, 1)]
    adj = contiguity(zones)
    assert adj["A"] == {"B"} and "C" not in adj["B"]


# -- Gi* ------------------------------------------------------------------------------------

def test_path_graph_matches_formula():
    values = {"a": 0.0, "b": 0.0, "c": 10.0, "d": 0.0, "e": 0.0}
    adj = {"a": {"b"}, "b": {"a", "c"}, "c": {"b", "d"}, "d": {"c", "e"}, "e": {"d"}}
    want = oracles.gi_star(values, adj)
    for row in gi_star(values, adj):
        assert row.gi_star_z == pytest.approx(want[row.region_id], rel=1e-12, abs=1e-12)


def random_graph(rng, n):
    ids = [f"n{i}" for i in range(n)]
    adj = {i: set() for i in ids}
    p = rng.uniform(0.05, 0.5)
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p:
                adj[ids[a]].add(ids[b])
                adj[ids[b]].add(ids[a])
    values = {i: float(v) for i, v in zip(ids, rng.poisson(rng.uniform(1, 50), n))}
    if len(set(values.values())) == 1:
        values[ids[0]] += 1.0
    return values, adj


def test_random_graphs_match_formula(rng):
    worst = 0.0
    for _ in range(100):
        values, adj = random_graph(rng, int(rng.integers(3, 60)))
        want = oracles.gi_star(values, adj)
        for row in gi_star(values, adj):
            w = want[row.region_id]
            worst = max(worst, abs(row.gi_star_z - w) / max(1.0, abs(w)))
    assert worst <= 1e-12


def test_planted_cluster_is_hot99(rng):
    adj = lattice_adjacency(10, 10)
    values = {k: float(v) for k, v in zip(sorted(adj), rng.integers(0, 4, 100))}
    cluster = ["Z0404", "Z0405", "Z0504", "Z0505"]
    for k in cluster:
        values[k] = 60.0
    rows = {r.region_id: r for r in gi_star(values, adj)}
    assert all(rows[k].classification == "hot99" for k in cluster)
    assert sum(r.classification.startswith("hot") for r in rows.values()) <= 16


def test_all_equal_values_give_zero():
    adj = lattice_adjacency(3, 3)
    for v in (0.0, 0.1, 7.0):
        rows = gi_star(dict.fromkeys(adj, v), adj)
        assert all(r.gi_star_z == 0.0 and r.classification == NOT_SIGNIFICANT for r in rows)


def test_too_few_zones():
    with pytest.raises(NoVarianceError):
        gi_star({"a": 1.0, "b": 2.0}, {})


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    values, adj = random_graph(rng, 12)
    base = {r.region_id: r.gi_star_z for r in gi_star(values, adj)}
    order = list(values)
    rng.shuffle(order)
    shuffled = {r.region_id: r.gi_star_z for r in gi_star({k: values[k] for k in order}, adj)}
    for k in base:
        assert shuffled[k] == pytest.approx(base[k], rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100), st.floats(-100, 100))
def test_affine_invariance(seed, scale, shift):
    values, adj = random_graph(np.random.default_rng(seed), 10)
    base = {r.region_id: r.gi_star_z for r in gi_star(values, adj)}
    moved = {r.region_id: r.gi_star_z for r in gi_star({k: scale * v + shift for k, v in values.items()}, adj)}
    for k in base:
        assert moved[k] == pytest.approx(base[k], rel=1e-7, abs=1e-7)


@pytest.mark.parametrize("z, label", [(2.58, "hot99"), (2.0, "hot95"), (1.7, "hot90"), (1.6, NOT_SIGNIFICANT),
                                      (-1.645, "cold90"), (-1.96, "cold95"), (-3.0, "cold99")])
def test_classification(z, label):
    assert classify_z(z) == label


def population_scenario():
    """A populous zone with many records and a small zone with more per head."""
    zones = grid_zones(5, 5, population=100_000)
    big, small = "Z0000", "Z0404"
    zones = [region(z.region_id, *z.rings[0][0], 1, 1,
                    {big: 2_000_000, small: 5_000}.get(z.region_id, 100_000)) for z in zones]
    counts = {big: 800, small: 150}
    recs = []
    k = 0
    for z in zones:
        n = counts.get(z.region_id, 40)
        lon0, lat0 = z.rings[0][0]
        for i in range(n):
            recs.append(coord_rec(str(k), lat0 + 0.1 + 0.8 * ((i * 7) % 13) / 13, lon0 + 0.1 + 0.8 * (i % 11) / 11))
            k += 1
    return zones, recs, big, small


def test_population_normalization_reverses_ranking():
    zones, recs, big, small = population_scenario()
    zc = count_by_zone(recs, zones)
    adj = contiguity(zones)
    raw = {r.region_id: r.gi_star_z for r in gi_star(zc, adj, use_rate=False)}
    rate = {r.region_id: r.gi_star_z for r in gi_star(zc, adj, use_rate=True)}
    assert raw[big] > raw[small]
    assert rate[small] > rate[big]


def test_zero_population_zone_dropped_from_rates():
    zc = ZoneCounts(["a", "b", "c", "d"], {"a": 1, "b": 2, "c": 3, "d": 4},
                    {"a": 10, "b": 0, "c": 10, "d": 10})
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows = gi_star(zc, {}, use_rate=True)
    assert [r.region_id for r in rows] == ["a", "c", "d"]
    assert any("zero-population" in str(w.message) for w in caught)


# -- temporal -------------------------------------------------------------------------

def _ts(iso):
    return calendar.timegm(datetime.fromisoformat(iso).replace(tzinfo=timezone.utc).utctimetuple())


def test_oregon_anchor():
    oregon = region("OR", -124, 42, 7, 4, utc_offset=-7.0)
    corridor = region("corr", -124, 44, 7, 1)
    rec = coord_rec("1", 44.6, -123.0, ts=_ts("2017-08-21T17:16:00"))
    hist = temporal_histogram([rec], corridor, [oregon], (date(2017, 8, 20), date(2017, 8, 22)))
    assert hist.inside[1, 10] == 1
    assert hist.total() == 1 and hist.outside.sum() == 0


def test_longitude_fallback_offset():
    corridor = region("corr", 0, 0, 1, 1)
    rec = coord_rec("1", 44.6, -123.0, ts=_ts("2017-08-21T17:16:00"))
    hist = temporal_histogram([rec], corridor, [], (date(2017, 8, 21), date(2017, 8, 21)))
    # round(-123 / 15) = -8
    assert hist.outside[0, 9] == 1
    assert hist.diagnostics["offset_fallback"] == 1


def test_corridor_centroid_is_inside():
    corridor = region("corr", 10, 10, 2, 2)
    rec = coord_rec("1", 11.0, 11.0, ts=_ts("2017-08-21T12:00:00"))
    hist = temporal_histogram([rec], corridor, [region("Z", 0, 0, 20, 20, utc_offset=0.0)],
                              (date(2017, 8, 21), date(2017, 8, 21)))
    assert hist.inside[0, 12] == 1


def test_zero_offsets_reduce_to_utc_hours(rng):
    zones = grid_zones(2, 2, size=5.0, utc_offset=0.0)
    corridor = region("corr", 0, 0, 5, 5)
    t0 = _ts("2017-08-20T00:00:00")
    recs = [coord_rec(str(i), *rng.uniform(0, 10, 2), ts=int(t0 + rng.integers(0, 3 * 86400)))
            for i in range(300)]
    hist = temporal_histogram(recs, corridor, zones, (date(2017, 8, 20), date(2017, 8, 22)))
    want = np.zeros((3, 24), dtype=int)
    for r in recs:
        dt = datetime.fromtimestamp(r.timestamp_utc, tz=timezone.utc)
        want[(dt.date() - date(2017, 8, 20)).days, dt.hour] += 1
    np.testing.assert_array_equal(hist.inside + hist.outside, want)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([-10.0, -7.0, -5.5, 0.0, 3.0, 9.5]))
def test_histogram_conserves_records(seed, offset):
    rng = np.random.default_rng(seed)
    zones = [region("Z", -20, -20, 40, 40, utc_offset=offset)]
    corridor = region("corr", -5, -5, 10, 10)
    t0 = _ts("2017-08-19T00:00:00")
    recs = [coord_rec(str(i), *rng.uniform(-25, 25, 2), ts=int(t0 + rng.integers(0, 6 * 86400)))
            for i in range(int(rng.integers(0, 120)))]
    recs += [GeoRecord("x", "u", t0, "no place")]
    hist = temporal_histogram(recs, corridor, zones, (date(2017, 8, 20), date(2017, 8, 23)))
    d = hist.diagnostics
    assert hist.total() + d["unlocated"] + d["out_of_range"] == len(recs)
