import math

import numpy as np
import pytest

from eventflow.geomodel import EARTH_RADIUS_M, Coordinate, GeoRecord, Place, PlaceScale, Region

M_PER_DEG = math.pi * EARTH_RADIUS_M / 180.0


def box(lon0, lat0, dlon, dlat):
    return [[lon0, lat0], [lon0 + dlon, lat0], [lon0 + dlon, lat0 + dlat], [lon0, lat0 + dlat], [lon0, lat0]]


def region(rid, lon0, lat0, dlon, dlat, population=1000, utc_offset=None):
    return Region(rid, rid, (box(lon0, lat0, dlon, dlat),), population, utc_offset)


def coord_rec(rid, lat, lon, user="u", ts=0, text=""):
    return GeoRecord(rid, user, ts, text, Coordinate(lat, lon))


def place_rec(rid, lon0, lat0, side_deg, scale=PlaceScale.CITY, user="u", ts=0, text=""):
    return GeoRecord(rid, user, ts, text, Place(scale, (box(lon0, lat0, side_deg, side_deg),)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting ----------------------------------------------------------
# Tests marked ``criterion(number, title)`` get one PASS/FAIL line in the
# terminal summary.  Measurements attached with ``record_property`` are shown
# next to the verdict.

_VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.stash[_VERDICTS] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and not rep.failed):
        return
    number, title = marker.args
    verdicts = item.config.stash[_VERDICTS]
    if rep.when == "call" or number not in verdicts:
        ok = rep.passed
        detail = ", ".join(f"{k}={v}" for k, v in item.user_properties)
        verdicts[number] = f"CRITERION {number:>2}  {'PASS' if ok else 'FAIL'}  {title}" + (
            f"  [{detail}]" if detail else "")


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash.get(_VERDICTS, {})
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        terminalreporter.write_line(verdicts[number])
