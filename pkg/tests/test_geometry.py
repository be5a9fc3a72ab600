import math

import pytest
from hypothesis import given, strategies as st

from gazeintent.geometry import (
    Circle,
    ConeUndefined,
    DegenerateInput,
    Point2,
    motion_cos,
    segment_circle_intersections,
    tangent_cone_cos,
)

UNIT = Circle(Point2(0.0, 0.0), 10.0)

finite = st.floats(min_value=-1e4, max_value=1e4, allow_nan=False, allow_infinity=False)


def test_segment_chord_through_center():
    assert segment_circle_intersections(Point2(0, 20), Point2(0, -20), UNIT) == 2


def test_segment_ending_inside():
    assert segment_circle_intersections(Point2(0, 20), Point2(0, 5), UNIT) == 1


def test_segment_line_misses():
    assert segment_circle_intersections(Point2(20, 20), Point2(20, -20), UNIT) == 0


def test_segment_tangent_counts_once():
    # horizontal line y=10 touches the circle exactly at (0, 10)
    assert segment_circle_intersections(Point2(-20, 10), Point2(20, 10), UNIT) == 1


def test_segment_endpoint_on_boundary():
    assert segment_circle_intersections(Point2(0, 10), Point2(0, 40), UNIT) == 1
    assert segment_circle_intersections(Point2(0, 10), Point2(0, 0), UNIT) == 1


def test_segment_fully_inside():
    assert segment_circle_intersections(Point2(-3, 0), Point2(3, 0), UNIT) == 0


def test_segment_degenerate_rejected():
    with pytest.raises(DegenerateInput):
        segment_circle_intersections(Point2(1, 1), Point2(1, 1), UNIT)


@given(finite, finite, finite, finite)
def test_segment_symmetric_in_endpoints(ax, ay, bx, by):
    a, b = Point2(ax, ay), Point2(bx, by)
    if a.dist(b) < 1e-6:
        return
    assert segment_circle_intersections(a, b, UNIT) == segment_circle_intersections(b, a, UNIT)


def test_tangent_cone_values():
    assert tangent_cone_cos(20.0, 10.0) == pytest.approx(math.sqrt(0.75), abs=1e-12)
    assert tangent_cone_cos(10.0, 10.0) == 0.0
    assert tangent_cone_cos(10.0 * math.sqrt(2.0), 10.0) == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_tangent_cone_inside_rejected():
    with pytest.raises(ConeUndefined):
        tangent_cone_cos(5.0, 10.0)


@given(st.floats(min_value=0.01, max_value=1e4), st.floats(min_value=1.0, max_value=1e4))
def test_tangent_cone_bounded(r, slack):
    value = tangent_cone_cos(r * slack, r)
    assert 0.0 <= value <= 1.0


def test_motion_cos_head_on():
    assert motion_cos(Point2(0, 20), Point2(0, 15), Point2(0, 0)) == 1.0


def test_motion_cos_directly_away():
    assert motion_cos(Point2(0, 20), Point2(0, 25), Point2(0, 0)) == -1.0


def test_motion_cos_oblique():
    # dot((5,0), (-5,-20)) / (5 * sqrt(425))
    expected = -25.0 / (5.0 * math.sqrt(425.0))
    assert motion_cos(Point2(0, 20), Point2(5, 20), Point2(0, 0)) == pytest.approx(expected, abs=1e-12)


def test_motion_cos_degenerate_rejected():
    with pytest.raises(DegenerateInput):
        motion_cos(Point2(0, 20), Point2(0, 20), Point2(0, 0))
    with pytest.raises(DegenerateInput):
        motion_cos(Point2(0, 20), Point2(0, 0), Point2(0, 0))


@given(finite, finite, finite, finite, finite, finite)
def test_motion_cos_bounded(px, py, nx, ny, cx, cy):
    prev, now, center = Point2(px, py), Point2(nx, ny), Point2(cx, cy)
    if prev.dist(now) < 1e-6 or now.dist(center) < 1e-6:
        return
    assert -1.0 <= motion_cos(prev, now, center) <= 1.0


@pytest.mark.parametrize("scale", [0.5, 2.0, 64.0])
def test_similarity_invariance(scale):
    # powers of two rescale exactly in binary floating point
    configs = [
        (Point2(0, 20), Point2(0, 5), Circle(Point2(0, 0), 10.0)),
        (Point2(3, 17), Point2(-6, 2), Circle(Point2(1, -2), 8.0)),
        (Point2(40, 40), Point2(12, -9), Circle(Point2(-5, 4), 11.0)),
    ]
    for a, b, circle in configs:
        sa = Point2(a.x * scale, a.y * scale)
        sb = Point2(b.x * scale, b.y * scale)
        sc = Circle(Point2(circle.center.x * scale, circle.center.y * scale), circle.radius * scale)
        assert segment_circle_intersections(sa, sb, sc) == segment_circle_intersections(a, b, circle)
        d = a.dist(circle.center)
        assert tangent_cone_cos(d * scale, sc.radius) == tangent_cone_cos(d, circle.radius)
        assert motion_cos(sa, sb, sc.center) == motion_cos(a, b, circle.center)
