import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from eventflow.errors import InvalidGeometryError
from eventflow.geomodel import (
    Coordinate,
    PlanarPoint,
    Projection,
    ProjectedRegion,
    Region,
    load_regions,
    point_in_region,
    polygon_area,
    polygon_centroid,
    project_forward,
    project_inverse,
    write_regions,
)

from conftest import box, region


def _to_deg_ring(xy, proj):
    lat, lon = proj.inverse(np.asarray(xy)[:, 0], np.asarray(xy)[:, 1])
    return np.column_stack([lon, lat])


# -- projection ---------------------------------------------------------------

def test_origin_maps_to_zero():
    proj = Projection(37.5, -120.25)
    p = project_forward(Coordinate(37.5, -120.25), proj)
    assert p == PlanarPoint(0.0, 0.0)


def test_longitude_step_at_equator():
    # R * radians(0.001) = 6371008.8 * 1.745329e-5
    p = project_forward(Coordinate(0.0, 0.001), Projection(0.0, 0.0))
    assert p.x == pytest.approx(111.19508, abs=1e-4)
    assert p.y == 0.0


def test_latitude_step_at_45():
    p = project_forward(Coordinate(45.001, 0.0), Projection(45.0, 0.0))
    assert p.x == 0.0
    assert p.y == pytest.approx(111.19508, abs=1e-4)


def test_longitude_shrinks_with_origin_latitude():
    p = project_forward(Coordinate(60.0, 0.001), Projection(60.0, 0.0))
    assert p.x == pytest.approx(111.19508 * 0.5, abs=1e-4)


def test_nonfinite_rejected():
    with pytest.raises(InvalidGeometryError):
        project_forward(PlanarPoint(float("nan"), 0.0), Projection(0, 0))
    with pytest.raises((InvalidGeometryError, ValueError)):
        Coordinate(float("inf"), 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-80, 80), st.floats(-177, 177), st.floats(-2, 2), st.floats(-2, 2))
def test_round_trip(olat, olon, dlat, dlon):
    proj = Projection(olat, olon)
    c = Coordinate(max(-89.9, min(89.9, olat + dlat)), olon + dlon)
    lat, lon = project_inverse(project_forward(c, proj), proj)
    assert lat == pytest.approx(c.lat, abs=1e-9)
    assert lon == pytest.approx(c.lon, abs=1e-9)


# -- area and centroid ----------------------------------------------------------

def test_square_area():
    assert polygon_area([[0, 0], [1000, 0], [1000, 1000], [0, 1000], [0, 0]]) == pytest.approx(1e6, rel=1e-12)


def test_triangle_area():
    assert polygon_area([[0, 0], [300, 0], [0, 400]]) == pytest.approx(60_000.0, rel=1e-12)


def test_collinear_ring_rejected():
    with pytest.raises(InvalidGeometryError):
        polygon_area([[0, 0], [1, 1], [2, 2], [0, 0]])


def test_too_few_vertices_rejected():
    with pytest.raises(InvalidGeometryError):
        polygon_area([[0, 0], [1, 0], [0, 0]])


def test_area_orientation_independent():
    ring = [[0, 0], [1000, 0], [1000, 1000], [0, 1000]]
    assert polygon_area(ring) == polygon_area(ring[::-1])


@pytest.mark.parametrize("ring, expected", [
    ([[0, 0], [1000, 0], [1000, 1000], [0, 1000]], (500, 500)),
    ([[2000, 0], [3000, 0], [3000, 1000], [2000, 1000]], (2500, 500)),
    ([[0, 0], [3000, 0], [0, 3000]], (1000, 1000)),
])
def test_centroid_examples(ring, expected):
    c = polygon_centroid(ring)
    assert c.x == pytest.approx(expected[0], abs=1e-9)
    assert c.y == pytest.approx(expected[1], abs=1e-9)


def test_centroid_of_collinear_ring_is_vertex_mean():
    c = polygon_centroid([[0, 0], [10, 0], [20, 0], [0, 0]])
    assert (c.x, c.y) == pytest.approx((10.0, 0.0))


coords = st.floats(-5e4, 5e4, allow_nan=False)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(coords, coords), min_size=3, max_size=12), coords, coords)
def test_area_translation_invariant(points, dx, dy):
    ring = np.array(points)
    try:
        a = polygon_area(ring)
    except InvalidGeometryError:
        return
    span = np.ptp(ring, axis=0).max()
    assume(a > 1e-6 * span * span)
    b = polygon_area(ring + [dx, dy])
    assert b == pytest.approx(a, rel=1e-6, abs=1e-3)


@settings(max_examples=150, deadline=None)
@given(st.floats(10, 1e4), st.floats(10, 1e4), coords, coords, st.floats(0, 2 * math.pi))
def test_rectangle_area_and_centroid_under_rotation(w, h, cx, cy, theta):
    corners = np.array([[-w / 2, -h / 2], [w / 2, -h / 2], [w / 2, h / 2], [-w / 2, h / 2]])
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    ring = corners @ rot.T + [cx, cy]
    assert polygon_area(ring) == pytest.approx(w * h, rel=1e-9)
    c = polygon_centroid(ring)
    assert c.x == pytest.approx(cx, abs=1e-6 * (w + h + abs(cx)))
    assert c.y == pytest.approx(cy, abs=1e-6 * (w + h + abs(cy)))


# -- point in polygon -----------------------------------------------------------

def _pregion(ring_deg):
    proj = Projection(0.0, 0.0)
    return ProjectedRegion.from_region(Region("A", "A", (ring_deg,)), proj), proj


def test_interior_point_inside():
    pr, proj = _pregion(box(0, 0, 0.01, 0.01))
    c = project_forward(Coordinate(0.005, 0.005), proj)
    assert point_in_region(c, pr)


def test_point_outside_bbox():
    pr, proj = _pregion(box(0, 0, 0.01, 0.01))
    edge = project_forward(Coordinate(0.0, 0.01), proj)
    assert not point_in_region(PlanarPoint(edge.x + 1.0, 100.0), pr)


def test_vertex_counts_as_inside():
    pr, proj = _pregion(box(0, 0, 0.01, 0.01))
    assert point_in_region(project_forward(Coordinate(0.01, 0.01), proj), pr)
    assert point_in_region(project_forward(Coordinate(0.0, 0.005), proj), pr)


def _winding_number(x, y, ring):
    """Reference: sum of signed angles subtended by each edge."""
    total = 0.0
    for (x0, y0), (x1, y1) in zip(ring[:-1], ring[1:]):
        a0 = math.atan2(y0 - y, x0 - x)
        a1 = math.atan2(y1 - y, x1 - x)
        d = a1 - a0
        while d > math.pi:
            d -= 2 * math.pi
        while d < -math.pi:
            d += 2 * math.pi
        total += d
    return round(total / (2 * math.pi))


def test_point_in_polygon_matches_winding_number(rng):
    proj = Projection(0.0, 0.0)
    for _ in range(30):
        # star-shaped polygons are simple, so even-odd equals non-zero winding
        k = int(rng.integers(3, 12))
        angles = np.sort(rng.uniform(0, 2 * np.pi, k))
        radii = rng.uniform(0.3, 1.0, k) * 0.05
        ring_deg = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
        ring_deg = np.vstack([ring_deg, ring_deg[:1]])
        try:
            pr = ProjectedRegion.from_region(Region("A", "A", (ring_deg.tolist(),)), proj)
        except InvalidGeometryError:
            continue
        ring_xy = np.column_stack(proj.forward(ring_deg[:, 1], ring_deg[:, 0]))
        pts = rng.uniform(-0.06, 0.06, (200, 2))
        xs, ys = proj.forward(pts[:, 1], pts[:, 0])
        got = pr.contains(xs, ys)
        for x, y, g in zip(xs, ys, got):
            if _min_edge_distance(x, y, ring_xy) < 1e-3:
                continue
            assert bool(g) == (_winding_number(x, y, ring_xy) != 0)


def _min_edge_distance(x, y, ring):
    best = math.inf
    for (x0, y0), (x1, y1) in zip(ring[:-1], ring[1:]):
        dx, dy = x1 - x0, y1 - y0
        t = max(0.0, min(1.0, ((x - x0) * dx + (y - y0) * dy) / (dx * dx + dy * dy)))
        best = min(best, math.hypot(x - x0 - t * dx, y - y0 - t * dy))
    return best


# -- region files ---------------------------------------------------------------

def test_region_geojson_round_trip(tmp_path):
    regions = [region("A", 0, 0, 1, 1, 500, -7.0), region("B", 1, 0, 1, 1, 20)]
    write_regions(tmp_path / "r.geojson", regions)
    back = load_regions(tmp_path / "r.geojson")
    assert [r.region_id for r in back] == ["A", "B"]
    assert back[0].population == 500 and back[0].utc_offset_hours == -7.0
    assert back[1].utc_offset_hours is None
    np.testing.assert_array_equal(back[0].rings[0], regions[0].rings[0])


def test_duplicate_region_ids_rejected(tmp_path):
    write_regions(tmp_path / "r.geojson", [region("A", 0, 0, 1, 1), region("A", 1, 0, 1, 1)])
    with pytest.raises(Exception, match="duplicate region_id values: A"):
        load_regions(tmp_path / "r.geojson")


def test_scalar_and_vector_point_tests_agree(rng):
    from eventflow.geomodel import points_in_rings
    ring = np.array(box(0, 0, 1, 1) + [])
    tri = np.array([[0.2, 0.2], [0.8, 0.2], [0.5, 0.9], [0.2, 0.2]])
    rings = (ring, tri)
    pts = np.vstack([rng.uniform(-0.2, 1.2, (300, 2)), ring[:, :2], tri[:, :2], [[0.5, 0.2], [0.0, 0.5]]])
    vec = points_in_rings(pts[:, 0], pts[:, 1], rings)
    for (x, y), v in zip(pts, vec):
        assert bool(points_in_rings(x, y, rings)) == bool(v)
