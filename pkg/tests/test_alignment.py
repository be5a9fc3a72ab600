import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gazeintent.alignment import (
    Assignment,
    CameraPose,
    NormBox,
    alignment_accuracy,
    grid_boxes,
    iou,
    match_objects,
    pair_cost,
    perturb_boxes,
    project_object,
    solve_assignment,
    sweep_alignment,
)
from gazeintent.scene import WorkspaceObject

IDENTITY = CameraPose(rotation=(1, 0, 0, 0), translation=(0, 0, 0), intrinsics=(500, 500, 320, 240))
IMAGE = (640.0, 480.0)


def _object(points, object_id="obj"):
    return WorkspaceObject(
        object_id=object_id,
        label=object_id,
        position=(0.0, 0.0, 1.0),
        pre_grasp_position=(0.0, 0.0, 2.0),
        pre_grasp_orientation=(1.0, 0.0, 0.0, 0.0),
        footprint=((-0.05, -0.05), (0.05, -0.05), (0.05, 0.05), (-0.05, 0.05)),
        z_extent=(0.9, 1.1),
        surface_points=tuple(points),
    )


def test_project_on_axis_point_spread():
    pts = [(dx, dy, 1.0) for dx in (-0.05, 0.05) for dy in (-0.05, 0.05)]
    box = project_object(_object(pts), IDENTITY, IMAGE)
    assert box is not None
    assert box.cx == pytest.approx(0.5, abs=1e-12)
    assert box.cy == pytest.approx(0.5, abs=1e-12)
    assert box.w == pytest.approx(50.0 / 640.0, abs=1e-12)
    assert box.h == pytest.approx(50.0 / 480.0, abs=1e-12)


def test_project_behind_camera_is_none():
    pts = [(0.0, 0.0, -1.0), (0.05, 0.0, -1.2)]
    assert project_object(_object(pts), IDENTITY, IMAGE) is None


def test_project_translation_equivariance():
    # planar point set at constant depth: a lateral camera shift moves only
    # the box center, never its size
    pts = [(dx, dy, 1.0) for dx in (-0.05, 0.05) for dy in (-0.02, 0.02)]
    shifted = CameraPose(rotation=(1, 0, 0, 0), translation=(0.1, 0.0, 0.0), intrinsics=(500, 500, 320, 240))
    a = project_object(_object(pts), IDENTITY, IMAGE)
    b = project_object(_object(pts), shifted, IMAGE)
    assert a is not None and b is not None
    assert b.w == pytest.approx(a.w, abs=1e-12)
    assert b.h == pytest.approx(a.h, abs=1e-12)
    assert b.cy == pytest.approx(a.cy, abs=1e-12)
    assert (b.cx - a.cx) * 640.0 == pytest.approx(500.0 * 0.1 / 1.0, abs=1e-9)


def test_iou_identical():
    a = NormBox(0.5, 0.5, 0.2, 0.2)
    assert iou(a, a) == 1.0


def test_iou_disjoint():
    assert iou(NormBox(0.2, 0.2, 0.1, 0.1), NormBox(0.8, 0.8, 0.1, 0.1)) == 0.0


def test_iou_half_offset():
    # equal squares offset by half a width: 1/3
    a = NormBox(0.4, 0.5, 0.2, 0.2)
    b = NormBox(0.5, 0.5, 0.2, 0.2)
    assert iou(a, b) == pytest.approx(1.0 / 3.0, abs=1e-12)


norm_boxes = st.builds(
    NormBox,
    cx=st.floats(0.1, 0.9),
    cy=st.floats(0.1, 0.9),
    w=st.floats(0.05, 0.2),
    h=st.floats(0.05, 0.2),
)


@given(norm_boxes, norm_boxes)
def test_iou_symmetry(a, b):
    assert iou(a, b) == pytest.approx(iou(b, a), abs=1e-15)
    assert 0.0 <= iou(a, b) <= 1.0


def test_match_single_identical_pair():
    box = NormBox(0.5, 0.5, 0.2, 0.2)
    result = match_objects([box], [box])
    assert result.pairs == ((0, 0),)
    assert result.total_cost == 0.0
    assert result.unmatched_projected == ()


def test_match_no_admissible_pair_is_empty():
    a = NormBox(0.2, 0.2, 0.1, 0.1)
    b = NormBox(0.8, 0.8, 0.1, 0.1)
    result = match_objects([a], [b])
    assert result.pairs == ()
    assert result.unmatched_projected == (0,)
    assert result.unmatched_detected == (0,)


def test_solve_assignment_two_by_two():
    cost = np.array([[1.0, 2.0], [2.0, 1.0]])
    result = solve_assignment(cost, np.ones((2, 2), dtype=bool))
    assert result.pairs == ((0, 0), (1, 1))
    assert result.total_cost == pytest.approx(2.0)


def test_solve_assignment_lexicographic_tie():
    cost = np.ones((2, 2))
    result = solve_assignment(cost, np.ones((2, 2), dtype=bool))
    assert result.pairs == ((0, 0), (1, 1))


def test_solve_assignment_respects_forbidden():
    cost = np.array([[0.1, 5.0], [0.2, 0.3]])
    admissible = np.array([[False, True], [True, True]])
    result = solve_assignment(cost, admissible)
    assert result.pairs == ((0, 1), (1, 0))


def brute_force(cost, admissible):
    """Max-cardinality then min-cost assignment by exhaustive enumeration."""
    m, n = cost.shape
    best = (0, 0.0)
    found = False
    for k in range(min(m, n), 0, -1):
        best_cost = None
        for rows in itertools.combinations(range(m), k):
            for cols in itertools.permutations(range(n), k):
                if all(admissible[r, c] for r, c in zip(rows, cols)):
                    total = math.fsum(cost[r, c] for r, c in zip(rows, cols))
                    if best_cost is None or total < best_cost:
                        best_cost = total
        if best_cost is not None:
            return k, best_cost
    return 0, 0.0


def test_match_equals_brute_force_on_random_instances():
    rng = np.random.default_rng(42)
    for _ in range(60):
        m = int(rng.integers(1, 6))
        n = int(rng.integers(1, 6))
        cost = rng.uniform(0.0, 2.0, size=(m, n))
        admissible = rng.uniform(size=(m, n)) < 0.7
        got = solve_assignment(cost, admissible)
        k, best = brute_force(cost, admissible)
        assert len(got.pairs) == k
        assert got.total_cost == pytest.approx(best, abs=1e-12)


def test_grid_with_one_percent_noise_stays_identity():
    base = grid_boxes()
    rng = np.random.default_rng(3)
    detected = perturb_boxes(base, rng, center_sigma=0.01 * 0.33, size_sigma=0.005)
    result = match_objects(base, detected)
    assert result.pairs == tuple((i, i) for i in range(9))


def test_alignment_accuracy_counts():
    perfect = Assignment(tuple((i, i) for i in range(9)), 0.0)
    truth = [(i, i) for i in range(9)]
    assert alignment_accuracy(perfect, truth) == 1.0
    partial = Assignment(tuple((i, i) for i in range(8)) + ((8, 7),), 0.0)
    assert alignment_accuracy(partial, truth) == pytest.approx(8.0 / 9.0)
    assert alignment_accuracy(Assignment((), 0.0), truth) == 0.0


def test_sweep_alignment_table_layout():
    rows = sweep_alignment(distances_cm=(40, 80), angles_deg=(0, 180), trials=5, seed=1)
    assert [row["distance_cm"] for row in rows] == [40, 80]
    assert set(rows[0]) == {"distance_cm", "angle_0", "angle_180"}
    assert rows[0]["angle_0"] >= 0.99  # near field is clean
    assert rows[1]["angle_180"] <= rows[0]["angle_0"]
