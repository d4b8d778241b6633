"""Tests for box geometry: corners, BEV clipping, IoU and GIoU."""

import itertools
import math

import numpy as np
import pytest
import torch

from fusedet.domain import BevPolygon, Box3D
from fusedet.domain.services import (
    bev_intersection_area,
    box_corners,
    giou_3d,
    intersection_polygon,
    iou_3d,
    iou_3d_matrix,
    iou_bev,
    nms_bev,
    points_in_boxes,
)
from fusedet.domain.services.geometry import giou_3d_pairs, iou_3d_pairs

OCTAGON_AREA = 2.0 * (math.sqrt(2.0) - 1.0)


class TestBox3D:
    """Tests for the Box3D value object."""

    def test_yaw_is_wrapped(self):
        """Test that yaw is wrapped into [-pi, pi)."""
        box = Box3D(0, 0, 0, 1, 1, 1, 2 * math.pi + 0.5)

        assert box.yaw == pytest.approx(0.5)
        assert Box3D(0, 0, 0, 1, 1, 1, -4.0).yaw == pytest.approx(2 * math.pi - 4.0)

    def test_pi_wraps_to_negative_pi(self):
        """Test that +pi maps onto the half-open lower end."""
        assert Box3D(0, 0, 0, 1, 1, 1, math.pi).yaw == pytest.approx(-math.pi)

    def test_degenerate_size_rejected(self):
        """Test that sizes below 1e-6 m are rejected."""
        with pytest.raises(ValueError, match="sizes"):
            Box3D(0, 0, 0, 1, 0.0, 1)

    def test_non_finite_rejected(self):
        """Test that NaN fields are rejected."""
        with pytest.raises(ValueError, match="finite"):
            Box3D(float("nan"), 0, 0, 1, 1, 1)

    def test_from_sequence_requires_seven_values(self):
        """Test that from_sequence checks the parameter count."""
        with pytest.raises(ValueError):
            Box3D.from_sequence([1, 2, 3])

    def test_volume(self):
        assert Box3D(0, 0, 0, 2, 3, 4).volume == 24


class TestBevPolygon:
    """Tests for BevPolygon."""

    def test_empty(self):
        assert BevPolygon.empty().is_empty
        assert BevPolygon.empty().area == 0.0

    def test_clockwise_rejected(self):
        """Test that clockwise vertices are rejected."""
        with pytest.raises(ValueError, match="counter-clockwise"):
            BevPolygon(vertices=((0, 0), (0, 1), (1, 1), (1, 0)))

    def test_too_few_vertices_rejected(self):
        with pytest.raises(ValueError):
            BevPolygon(vertices=((0, 0), (1, 0)))


class TestBoxCorners:
    """Tests for box_corners."""

    def test_unit_cube_axis_aligned(self, unit_cube):
        """Test that a unit cube has corners at (+-0.5, +-0.5, +-0.5)."""
        corners = np.array(box_corners(unit_cube))
        expected = np.array(list(itertools.product((-0.5, 0.5), repeat=3)))

        assert sorted(map(tuple, corners.round(12))) == sorted(map(tuple, expected))

    def test_quarter_turn_is_relabeling(self, unit_cube):
        """Test that a quarter turn of a unit cube gives the same corner set."""
        turned = Box3D(0, 0, 0, 1, 1, 1, math.pi / 2)
        a = sorted(map(tuple, np.array(box_corners(unit_cube)).round(9)))
        b = sorted(map(tuple, np.array(box_corners(turned)).round(9)))

        assert a == b

    def test_rotated_box_matches_rotation_matrix(self):
        """Test corners against direct rotation-matrix arithmetic."""
        box = Box3D(1, 2, 3, 4, 2, 2, math.pi / 4)
        c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
        rotation = np.array([[c, -s], [s, c]])
        footprint = np.array([[2, 1], [-2, 1], [-2, -1], [2, -1]], dtype=float)
        xy = footprint @ rotation.T + np.array([1.0, 2.0])
        expected = np.vstack([
            np.column_stack([xy, np.full(4, 2.0)]),
            np.column_stack([xy, np.full(4, 4.0)]),
        ])

        np.testing.assert_allclose(np.array(box_corners(box)), expected, atol=1e-12)

    def test_footprint_is_counter_clockwise(self):
        """Test that the bottom face winds counter-clockwise."""
        corners = np.array(box_corners(Box3D(0, 0, 0, 3, 1, 1, 0.3)))[:4, :2]
        polygon = BevPolygon(vertices=tuple(map(tuple, corners)))

        assert polygon.signed_area == pytest.approx(3.0)


class TestBevIntersection:
    """Tests for the footprint intersection."""

    def test_identical_squares(self, unit_cube):
        assert bev_intersection_area(unit_cube, unit_cube) == pytest.approx(1.0)

    def test_disjoint_squares(self, unit_cube):
        far = Box3D(10, 0, 0, 1, 1, 1)

        assert bev_intersection_area(unit_cube, far) == 0.0
        assert intersection_polygon(unit_cube, far).is_empty

    def test_rotated_square_is_octagon(self, unit_cube):
        """Test that a 45 degree rotated square cuts a regular octagon."""
        rotated = Box3D(0, 0, 0, 1, 1, 1, math.pi / 4)
        polygon = intersection_polygon(unit_cube, rotated)

        assert len(polygon.vertices) == 8
        assert polygon.area == pytest.approx(OCTAGON_AREA, abs=1e-9)
        assert bev_intersection_area(unit_cube, rotated) == pytest.approx(OCTAGON_AREA, abs=1e-9)

    def test_octagon_against_monte_carlo(self, unit_cube):
        """Test the octagon area against point sampling."""
        rotated = Box3D(0, 0, 0, 1, 1, 1, math.pi / 4)
        rng = np.random.default_rng(0)
        points = np.column_stack([rng.uniform(-0.5, 0.5, (200_000, 2)), np.zeros(200_000)])
        inside = points_in_boxes(points, np.array([rotated.as_tuple()]))[:, 0]

        assert inside.mean() == pytest.approx(OCTAGON_AREA, abs=0.01)

    def test_symmetric(self):
        """Test that the intersection is symmetric bit for bit."""
        a = Box3D(0.3, -0.2, 0, 2.1, 1.3, 1, 0.7)
        b = Box3D(-0.1, 0.4, 0, 1.7, 0.9, 1, -1.2)

        assert bev_intersection_area(a, b) == bev_intersection_area(b, a)

    def test_contained_box(self):
        """Test that a contained footprint intersects in its own area."""
        outer = Box3D(0, 0, 0, 4, 4, 1, 0.2)
        inner = Box3D(0.1, 0, 0, 1, 0.5, 1, 1.0)

        assert bev_intersection_area(outer, inner) == pytest.approx(0.5, abs=1e-9)


class TestIou:
    """Tests for 3D and BEV IoU."""

    def test_identity(self, unit_cube):
        assert iou_3d(unit_cube, unit_cube) == pytest.approx(1.0)
        assert iou_bev(unit_cube, unit_cube) == pytest.approx(1.0)

    def test_vertically_disjoint(self, unit_cube):
        """Test that boxes without height overlap have zero 3D IoU."""
        above = Box3D(0, 0, 2, 1, 1, 1)

        assert iou_3d(unit_cube, above) == 0.0
        assert iou_bev(unit_cube, above) == pytest.approx(1.0)

    def test_rotated_coaxial_cubes(self, unit_cube):
        """Test the 45 degree coaxial case against the octagon formula."""
        rotated = Box3D(0, 0, 0, 1, 1, 1, math.pi / 4)
        expected = OCTAGON_AREA / (2 - OCTAGON_AREA)

        assert iou_3d(unit_cube, rotated) == pytest.approx(expected, abs=1e-9)
        assert iou_3d(unit_cube, rotated) == pytest.approx(0.707107, abs=1e-6)
        assert iou_bev(unit_cube, rotated) == pytest.approx(0.707107, abs=1e-6)

    def test_disjoint_footprints(self, unit_cube):
        assert iou_bev(unit_cube, Box3D(5, 5, 0, 1, 1, 1)) == 0.0

    def test_bounded_and_symmetric(self):
        """Test IoU bounds and symmetry on random pairs."""
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = Box3D(*rng.uniform(-1, 1, 3), *rng.uniform(0.5, 3, 3), rng.uniform(-math.pi, math.pi))
            b = Box3D(*rng.uniform(-1, 1, 3), *rng.uniform(0.5, 3, 3), rng.uniform(-math.pi, math.pi))
            value = iou_3d(a, b)

            assert 0.0 <= value <= 1.0
            assert value == iou_3d(b, a)

    def test_rigid_motion_invariance(self):
        """Test that a shared rigid motion leaves IoU unchanged."""
        a = Box3D(1, 0.5, 0, 3, 1.5, 1.5, 0.2)
        b = Box3D(1.4, 0.2, 0.1, 3.2, 1.4, 1.6, -0.3)
        moved_a = a.transformed(0.8, (5, -2, 1))
        moved_b = b.transformed(0.8, (5, -2, 1))

        assert iou_3d(moved_a, moved_b) == pytest.approx(iou_3d(a, b), abs=1e-9)

    def test_scale_invariance(self):
        """Test that uniform scaling leaves IoU unchanged."""
        a = Box3D(1, 0.5, 0, 3, 1.5, 1.5, 0.2)
        b = Box3D(1.4, 0.2, 0.1, 3.2, 1.4, 1.6, -0.3)

        assert iou_3d(a.scaled(2.5), b.scaled(2.5)) == pytest.approx(iou_3d(a, b), abs=1e-9)

    def test_matrix_shape(self):
        """Test pairwise matrices, including empty inputs."""
        a = torch.tensor([[0, 0, 0, 1, 1, 1, 0.0]] * 3, dtype=torch.float64)
        b = torch.tensor([[0, 0, 0, 1, 1, 1, 0.0]] * 2, dtype=torch.float64)

        assert iou_3d_matrix(a, b).shape == (3, 2)
        assert iou_3d_matrix(a, b[:0]).shape == (3, 0)

    def test_gradients_are_finite(self):
        """Test that IoU is differentiable at a generic overlap."""
        a = torch.tensor([[0.0, 0.0, 0.0, 2.0, 1.0, 1.0, 0.3]], dtype=torch.float64, requires_grad=True)
        b = torch.tensor([[0.4, 0.1, 0.2, 1.5, 1.2, 1.1, -0.4]], dtype=torch.float64)
        iou_3d_pairs(a, b).sum().backward()

        assert torch.isfinite(a.grad).all()
        assert a.grad.abs().sum() > 0


class TestGiou:
    """Tests for generalized IoU."""

    def test_identity(self, unit_cube):
        assert giou_3d(unit_cube, unit_cube) == pytest.approx(1.0)

    def test_touching_cubes(self, unit_cube):
        """Test that touching cubes fill their enclosing box and score 0."""
        neighbour = Box3D(1, 0, 0, 1, 1, 1)

        assert giou_3d(unit_cube, neighbour) == pytest.approx(0.0, abs=1e-12)

    def test_far_apart_approaches_minus_one(self, unit_cube):
        """Test that distant cubes approach -1 from above."""
        value = giou_3d(unit_cube, Box3D(1000, 0, 0, 1, 1, 1))

        assert -1.0 < value < -0.99

    def test_not_above_iou(self):
        """Test that GIoU never exceeds IoU."""
        a = torch.tensor([[0, 0, 0, 2, 1, 1, 0.4]], dtype=torch.float64)
        b = torch.tensor([[0.5, 0.3, 0.1, 1, 2, 1, -0.2]], dtype=torch.float64)

        assert giou_3d_pairs(a, b) <= iou_3d_pairs(a, b)


class TestNms:
    """Tests for BEV non-maximum suppression."""

    def test_suppresses_overlapping(self):
        """Test that the lower-scoring duplicate is removed."""
        boxes = torch.tensor(
            [[0, 0, 0, 2, 2, 1, 0], [0.1, 0, 0, 2, 2, 1, 0], [10, 0, 0, 2, 2, 1, 0]],
            dtype=torch.float64,
        )
        scores = torch.tensor([0.5, 0.9, 0.3], dtype=torch.float64)

        assert nms_bev(boxes, scores, 0.5).tolist() == [1, 2]

    def test_empty(self):
        boxes = torch.zeros((0, 7), dtype=torch.float64)

        assert nms_bev(boxes, torch.zeros(0), 0.5).numel() == 0


class TestPointsInBoxes:
    """Tests for point containment."""

    def test_rotated_containment(self):
        """Test containment in a rotated box."""
        boxes = np.array([[0, 0, 0, 4, 1, 1, math.pi / 2]])
        points = np.array([[0, 1.9, 0], [1.9, 0, 0]])

        assert points_in_boxes(points, boxes)[:, 0].tolist() == [True, False]

    def test_no_boxes(self):
        assert points_in_boxes(np.zeros((3, 4)), np.zeros((0, 7))).shape == (3, 0)
