import math

import numpy as np
import pytest

from geokonvex.constraints import (Annotation, ObstacleSet, Segment, auto_z,
                                   build_search_space, convex_hull,
                                   edge_blocked, node_allowed,
                                   polygon_area_centroid, validate)
from geokonvex.errors import ConfigurationError, ValidationError
from geokonvex.grid import GridSpec, LiftedPoint

SPEC = GridSpec(64, 64, 32)


def test_validate_examples():
    ann = Annotation(source_xy=(33.0, 32.0), source_theta=math.pi / 2)
    assert validate(ann, (32.0, 32.0), SPEC) == []
    bad = Annotation(source_xy=(33.0, 32.0), source_theta=-math.pi / 2)
    errs = validate(bad, (32.0, 32.0), SPEC)
    assert any(e.code == "source.orientation.incompatible" for e in errs)
    same = Annotation(source_xy=(32.0, 32.0), source_theta=0.0)
    errs = validate(same, (32.0, 32.0), SPEC)
    assert any(e.code == "annotation.z.equals_source" for e in errs)
    outside = Annotation(source_xy=(33.0, 32.0), source_theta=math.pi / 2)
    errs = validate(outside, (70.0, 32.0), SPEC)
    assert any(e.code == "annotation.z.outside" for e in errs)


def test_auto_z_square_and_triangle():
    ann = Annotation(source_xy=(1.0, 0.0), source_theta=0.0,
                     landmarks=[(0, 0), (2, 0), (2, 2), (0, 2)])
    assert auto_z(ann) == pytest.approx((1.0, 1.0))
    tri = Annotation(source_xy=(0.0, 0.0), source_theta=0.0,
                     landmarks=[(3, 0), (0, 3)])
    assert auto_z(tri) == pytest.approx((1.0, 1.0))
    collinear = Annotation(source_xy=(0.0, 0.0), source_theta=0.0,
                           landmarks=[(1, 1), (2, 2), (3, 3)])
    with pytest.raises(ValidationError):
        auto_z(collinear)


def test_convex_hull_and_centroid():
    pts = np.array([(0, 0), (4, 0), (4, 4), (0, 4), (2, 2), (1, 1)],
                   dtype=float)
    hull = convex_hull(pts)
    assert len(hull) == 4
    area, c = polygon_area_centroid(hull)
    assert abs(area) == pytest.approx(16.0)
    assert c == pytest.approx((2.0, 2.0))


def test_search_space_base_case():
    ann = Annotation(source_xy=(48.0, 32.0), source_theta=math.pi / 2,
                     z=(32.0, 32.0))
    obstacles, ends = build_search_space(ann, SPEC)
    assert len(obstacles.physical_segments) == 1
    assert obstacles.angular_wall == pytest.approx(math.pi / 2)
    seg = obstacles.physical_segments[0]
    assert seg.p1 == (32.0, 32.0)
    assert seg.p2[0] == pytest.approx(63.0)  # reaches the image border
    # endpoints on opposite sides of the ray
    z = np.array([32.0, 32.0])
    ray = np.array([48.0, 32.0]) - z
    sides = []
    for idx in (ends.p0, ends.p1):
        node = np.array([idx[0], idx[1]], dtype=float)
        sides.append(np.sign(ray[0] * (node[1] - z[1])
                             - ray[1] * (node[0] - z[0])))
    assert sides[0] * sides[1] == -1.0
    # and on opposite sides of the angular wall
    t0 = SPEC.theta_of_level(ends.p0[2])
    t1 = SPEC.theta_of_level(ends.p1[2])
    assert t0 > math.pi / 2 > t1


def test_landmark_on_source_ray_rejected():
    ann = Annotation(source_xy=(48.0, 32.0), source_theta=math.pi / 2,
                     z=(32.0, 32.0), landmarks=[(56.0, 32.0)])
    with pytest.raises(ValidationError) as err:
        build_search_space(ann, SPEC)
    assert "severs" in err.value.code


def test_edge_blocked_ray_and_gap():
    obstacles = ObstacleSet(
        physical_segments=(
            Segment((10.0, 10.0), (10.0, 30.0)),
            # landmark-like walls with a one pixel gap around (30, 20)
            Segment((20.0, 20.0), (30.0, 20.0), open2=True),
            Segment((30.0, 20.0), (50.0, 20.0), open1=True),
        ),
        angular_wall=1.0,
        gap_radius=1.0)
    blocked = edge_blocked(LiftedPoint(8, 20, 0.1), LiftedPoint(12, 20, 0.1),
                           obstacles)
    assert blocked  # crosses the first wall transversally
    through_gap = edge_blocked(LiftedPoint(30, 19.5, 0.1),
                               LiftedPoint(30, 20.5, 0.1), obstacles)
    assert not through_gap
    beside_gap = edge_blocked(LiftedPoint(28, 19.5, 0.1),
                              LiftedPoint(28, 20.5, 0.1), obstacles)
    assert beside_gap
    # angular wall crossing
    assert edge_blocked(LiftedPoint(5, 5, 0.95), LiftedPoint(5, 5, 1.05),
                        obstacles)
    assert not edge_blocked(LiftedPoint(5, 5, 1.05), LiftedPoint(5, 5, 1.15),
                            obstacles)


def test_blocked_mask_and_node_allowed():
    mask = np.zeros((64, 64), dtype=bool)
    mask[40, 40] = True
    obstacles = ObstacleSet(blocked_mask=mask, angular_wall=None)
    allowed = node_allowed(SPEC, obstacles)
    assert not allowed[:, 40, 40].any()
    assert allowed[:, 0, 0].all()
    assert edge_blocked(LiftedPoint(39.6, 40.0, 0.0),
                        LiftedPoint(40.4, 40.0, 0.0), obstacles)


def test_angular_wall_level_blocked():
    obstacles = ObstacleSet(angular_wall=SPEC.theta_of_level(3))
    allowed = node_allowed(SPEC, obstacles)
    assert not allowed[3].any()
    assert allowed[2].all() and allowed[4].all()


def test_endpoint_snapping_failure_is_configuration_error():
    # walls so dense around the source that no free node qualifies
    mask = np.ones((64, 64), dtype=bool)
    ann = Annotation(source_xy=(48.0, 32.0), source_theta=math.pi / 2,
                     z=(32.0, 32.0),
                     fg_scribbles=[np.array([[x, y]
                                             for x in range(0, 64, 1)
                                             for y in range(0, 64, 8)],
                                            dtype=float)])
    with pytest.raises((ConfigurationError, ValidationError)):
        build_search_space(ann, SPEC)


def test_search_space_deterministic():
    ann = Annotation(source_xy=(48.0, 32.0), source_theta=math.pi / 2,
                     z=(32.0, 32.0),
                     landmarks=[(32.0, 48.0), (16.0, 32.0)])
    o1, e1 = build_search_space(ann, SPEC)
    o2, e2 = build_search_space(ann, SPEC)
    assert e1 == e2
    assert np.array_equal(o1.effective_segments(), o2.effective_segments())
