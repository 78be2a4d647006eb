import math

import numpy as np
import pytest

from scenec.geo import Polygon2
from scenec.ingest.types import LidarSweep, OsmBuilding, OsmRoad
from scenec.layout import (
    FacadeTexture,
    LayoutConfig,
    RectReplace,
    build_road_network,
    building_height,
    classify_building,
    extrude_building,
    fit_road_width,
    joint_road_mesh,
    orientation_histogram,
    plan_building,
    ribbon_mesh,
)
from scenec.taxonomy import CLASS_NAMES_20

from oracles import mesh_signed_volume, point_in_triangle

UNIT_SQUARE = Polygon2(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


def rect_polygon(length, width, yaw, center=(0.0, 0.0), jitter=0.0, rng=None):
    c, s = math.cos(yaw), math.sin(yaw)
    rot = np.array([[c, -s], [s, c]])
    local = np.array([
        [-length / 2, -width / 2],
        [length / 2, -width / 2],
        [length / 2, width / 2],
        [-length / 2, width / 2],
    ])
    pts = local @ rot.T + np.asarray(center)
    if jitter > 0.0:
        pts = pts + rng.uniform(-jitter, jitter, pts.shape)
    return Polygon2.from_points(pts)


def star_polygon(points, r_outer, r_inner, yaw=0.0, center=(0.0, 0.0)):
    ang = yaw + np.arange(2 * points) * math.pi / points
    radius = np.where(np.arange(2 * points) % 2 == 0, r_outer, r_inner)
    pts = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1) + np.asarray(center)
    return Polygon2.from_points(pts)


class TestOrientationHistogram:
    def test_unit_square_18_bins(self):
        hist = orientation_histogram(UNIT_SQUARE, bins=18)
        assert hist.weights[0] == pytest.approx(2.0)
        assert hist.weights[9] == pytest.approx(2.0)  # pi/2 bin
        assert hist.weights.sum() == pytest.approx(4.0)
        assert np.count_nonzero(hist.weights) == 2

    def test_rotated_rectangle(self):
        # construct-by-rotation oracle: 4x2 at 30 deg
        poly = rect_polygon(4.0, 2.0, math.radians(30.0))
        hist = orientation_histogram(poly, bins=36)
        assert hist.weights[6] == pytest.approx(8.0)   # 30 deg bin
        assert hist.weights[24] == pytest.approx(4.0)  # 120 deg bin

    def test_hexagon_three_equal_bins(self):
        ang = np.arange(6) * math.pi / 3.0
        hexagon = Polygon2(np.stack([np.cos(ang), np.sin(ang)], axis=1))
        hist = orientation_histogram(hexagon, bins=36)
        nz = np.flatnonzero(hist.weights)
        assert len(nz) == 3
        assert np.allclose(hist.weights[nz], hist.weights[nz[0]])
        assert np.all(np.diff(nz) == 12)  # pi/3 apart at 5 deg bins

    def test_total_weight_is_perimeter(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            poly = rect_polygon(rng.uniform(2, 30), rng.uniform(2, 30),
                                rng.uniform(0, math.pi), jitter=0.02, rng=rng)
            hist = orientation_histogram(poly, bins=36)
            assert hist.weights.sum() == pytest.approx(poly.perimeter(), rel=1e-9)


class TestClassifyBuilding:
    def test_unit_square(self):
        out = classify_building(UNIT_SQUARE)
        assert isinstance(out, RectReplace)
        assert out.yaw == pytest.approx(0.0, abs=1e-9)
        assert np.allclose(sorted(out.extents), [1.0, 1.0])
        assert np.allclose(out.center, [0.5, 0.5])

    def test_jittered_rectangles(self):
        # generator doubles as oracle: recovered yaw must match construction
        rng = np.random.default_rng(42)
        for _ in range(100):
            yaw = rng.uniform(0, math.pi)
            poly = rect_polygon(rng.uniform(3, 40), rng.uniform(3, 40), yaw,
                                center=rng.uniform(-100, 100, 2), jitter=0.02, rng=rng)
            out = classify_building(poly)
            assert isinstance(out, RectReplace)
            err = abs(out.yaw - yaw) % math.pi
            err = min(err, math.pi - err)
            # detected yaw may be the perpendicular partner
            err = min(err, abs(err - math.pi / 2))
            assert math.degrees(err) < 2.0

    def test_stars_are_facade(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(5, 9))
            poly = star_polygon(n, rng.uniform(5, 20), rng.uniform(2, 4),
                                yaw=rng.uniform(0, math.pi))
            assert isinstance(classify_building(poly), FacadeTexture)

    def test_l_shape_area_ratio(self):
        # notch side sqrt(1.6) on a 2x2 outline: footprint 2.4, hull 3.2,
        # ratio exactly 0.75 (< 0.85 threshold)
        t = math.sqrt(1.6)
        poly = Polygon2(np.array([
            [0.0, 0.0], [2.0, 0.0], [2.0, 2.0 - t], [2.0 - t, 2.0 - t], [2.0 - t, 2.0],
            [0.0, 2.0],
        ]))
        from scenec.geo import convex_hull, polygon_area
        assert polygon_area(poly) / polygon_area(convex_hull(poly.vertices)) == pytest.approx(0.75)
        cfg = LayoutConfig(use_area_ratio=True, rect_ratio=0.85)
        assert isinstance(classify_building(poly, cfg), FacadeTexture)
        # without the flag the axis-aligned L is rectangular enough
        assert isinstance(classify_building(poly), RectReplace)

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(3)
        base_yaw = 0.31
        poly = rect_polygon(12.0, 5.0, base_yaw)
        for _ in range(20):
            phi = rng.uniform(0, math.pi)
            rotated = rect_polygon(12.0, 5.0, base_yaw + phi)
            a = classify_building(poly)
            b = classify_building(rotated)
            diff = (b.yaw - a.yaw - phi) % math.pi
            diff = min(diff, math.pi - diff)
            diff = min(diff, abs(diff - math.pi / 2))
            assert math.degrees(diff) < 1.0

    def test_scale_invariance(self):
        poly = rect_polygon(10.0, 4.0, 0.7)
        big = Polygon2(poly.vertices * 37.0)
        assert isinstance(classify_building(poly), RectReplace)
        assert isinstance(classify_building(big), RectReplace)


class TestExtrude:
    def test_unit_square_height3(self):
        plan = plan_building(OsmBuilding(footprint=UNIT_SQUARE), LayoutConfig(default_height=3.0))
        mesh = extrude_building(plan)
        assert len(mesh) == 12
        assert mesh_signed_volume(mesh.vertices, mesh.triangles) == pytest.approx(3.0, abs=1e-9)
        assert mesh.is_closed()

    def test_triangle_footprint(self):
        tri = Polygon2(np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]))
        mesh = extrude_building(BuildingPlanStub(tri, 5.0))
        assert len(mesh) == 8
        assert mesh.is_closed()

    def test_levels_rule(self):
        b = OsmBuilding(footprint=UNIT_SQUARE, levels=4)
        assert building_height(b) == pytest.approx(12.0)
        assert building_height(OsmBuilding(footprint=UNIT_SQUARE)) == pytest.approx(10.0)

    def test_l_shape_watertight(self):
        poly = Polygon2(np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], dtype=float))
        mesh = extrude_building(BuildingPlanStub(poly, 4.0))
        assert mesh.is_closed()
        assert mesh_signed_volume(mesh.vertices, mesh.triangles) == pytest.approx(12.0, abs=1e-9)


def BuildingPlanStub(poly, height):
    from scenec.layout import BuildingPlan, FacadeTexture
    return BuildingPlan(footprint=poly, classification=FacadeTexture(), height=height)


class TestRoads:
    def test_straight_ribbon_area(self):
        line = np.array([[0.0, 0.0], [10.0, 0.0]])
        mesh = ribbon_mesh(line, 4.0)
        assert mesh.surface_area() == pytest.approx(40.0, abs=1e-6)

    def test_right_angle_no_overlap(self):
        line = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0]])
        mesh = ribbon_mesh(line, 4.0)
        rng = np.random.default_rng(0)
        pts = rng.uniform([-3, -3], [13, 13], size=(4000, 2))
        v2 = mesh.vertices[:, :2]
        for p in pts:
            hits = sum(
                point_in_triangle(p, v2[t[0]], v2[t[1]], v2[t[2]], eps=-1e-9)
                for t in mesh.triangles
            )
            assert hits <= 1

    def test_weld_shared_endpoint(self):
        # collinear ways meeting at (10, 0): the joint mesh shares the seam vertices
        ways = [
            OsmRoad(centerline=np.array([[0.0, 0.0], [10.0, 0.0]])),
            OsmRoad(centerline=np.array([[10.0, 0.3], [20.0, 0.3]])),  # within weld_tol
        ]
        plans = build_road_network(ways, [4.0, 4.0])
        assert np.allclose(plans[0].centerline[-1], plans[1].centerline[0])
        joint = joint_road_mesh(plans)
        # 3 cross sections x 2 vertices after welding (8 raw -> 6)
        assert len(joint.vertices) == 6

    def test_fit_width_uniform(self):
        rng = np.random.default_rng(5)
        n = 5000
        xs = rng.uniform(0, 50, n)
        lats = rng.uniform(-3.5, 3.5, n)
        pts = np.column_stack([xs, lats, np.zeros(n)])
        sweep = LidarSweep(points=pts, labels=np.full(n, -1, dtype=np.int16))
        line = np.array([[0.0, 0.0], [50.0, 0.0]])
        width = fit_road_width(line, sweep)
        assert width == pytest.approx(6.3, abs=0.2)

    def test_fit_width_labeled(self):
        road_id = CLASS_NAMES_20.index("road")
        rng = np.random.default_rng(6)
        n = 2000
        pts = np.column_stack([
            rng.uniform(0, 50, n), rng.uniform(-4.0, 4.0, n), rng.uniform(0.0, 0.1, n)])
        labels = np.full(n, road_id, dtype=np.int16)
        # labeled vegetation way off to the side must not widen the fit
        noise = np.column_stack([rng.uniform(0, 50, 500),
                                 rng.uniform(10, 15, 500),
                                 rng.uniform(0, 5, 500)])
        sweep = LidarSweep(points=np.vstack([pts, noise]),
                           labels=np.concatenate([labels, np.full(500, 14, dtype=np.int16)]))
        width = fit_road_width(np.array([[0.0, 0.0], [50.0, 0.0]]), sweep)
        assert width == pytest.approx(2 * 0.9 * 4.0, abs=0.3)

    def test_fallback_few_points(self):
        pts = np.tile(np.array([[1.0, 0.5, 0.0]]), (10, 1))
        sweep = LidarSweep(points=pts, labels=np.full(10, -1, dtype=np.int16))
        line = np.array([[0.0, 0.0], [50.0, 0.0]])
        assert fit_road_width(line, sweep, "residential") == pytest.approx(6.0)

    def test_fallback_no_sweep(self):
        line = np.array([[0.0, 0.0], [50.0, 0.0]])
        assert fit_road_width(line, None, "residential") == pytest.approx(6.0)
