"""Tests for the cost matrix and the Hungarian / OTA matchers."""

import numpy as np
import pytest
import torch

from fusedet.application.services.selftest_service import brute_force_min_cost
from fusedet.domain import Assignment, CostMatrix, DetectionOutput, GroundTruth, LossWeights
from fusedet.domain.services import (
    assign,
    build_cost_matrix,
    giou_3d_matrix,
    hungarian_match,
    normalize_boxes,
    ota_assign,
)
from fusedet.domain.services.matching import focal_cost

GT_BOXES = torch.tensor(
    [[10.0, -2.0, -1.0, 3.9, 1.6, 1.5, 0.1], [25.0, 5.0, -1.0, 0.8, 0.6, 1.7, -1.0]],
    dtype=torch.float64,
)


def _ground_truth(normalizer, boxes=GT_BOXES, labels=(0, 1)):
    return GroundTruth(
        boxes=boxes,
        labels=torch.tensor(labels, dtype=torch.long),
        signal_boxes=normalize_boxes(boxes, normalizer),
    )


def _predictions(normalizer, boxes, probs):
    return DetectionOutput(
        boxes=boxes,
        class_probs=torch.tensor(probs, dtype=torch.float64),
        signal_boxes=normalize_boxes(boxes, normalizer, check_range=False),
    )


def _reference_ota(values: np.ndarray, k: int) -> dict[int, int]:
    """Greedy top-k claim; conflicts go to the gt the prediction is cheapest for."""
    num_preds, num_gt = values.shape
    owner: dict[int, int] = {}
    for j in range(num_gt):
        for p in np.argsort(values[:, j], kind="stable")[:k]:
            p = int(p)
            if p not in owner or values[p, j] < values[p, owner[p]]:
                owner[p] = j
    for j in range(num_gt):
        if j in owner.values():
            continue
        for p in np.argsort(values[:, j], kind="stable"):
            p = int(p)
            donor = owner.get(p)
            if donor is None or list(owner.values()).count(donor) > 1:
                owner[p] = j
                break
    return owner


class TestCostMatrix:
    """Tests for build_cost_matrix."""

    def test_perfect_match_costs_nothing(self, kitti_normalizer):
        """Test that an exact prediction with probability 1 costs about 0."""
        preds = _predictions(kitti_normalizer, GT_BOXES[:1], [[1.0, 0.0, 0.0, 0.0]])
        gts = _ground_truth(kitti_normalizer, GT_BOXES[:1], (0,))
        cost = build_cost_matrix(preds, gts, LossWeights(), kitti_normalizer.range_diagonal)

        assert float(cost.values[0, 0]) == pytest.approx(0.0, abs=1e-6)

    def test_diagonal_dominance(self, kitti_normalizer):
        """Test that each exact prediction is cheapest for its own gt."""
        preds = _predictions(
            kitti_normalizer, GT_BOXES.clone(), [[0.9, 0.05, 0.0, 0.1], [0.05, 0.9, 0.0, 0.1]]
        )
        cost = build_cost_matrix(
            preds, _ground_truth(kitti_normalizer), LossWeights(), kitti_normalizer.range_diagonal
        ).values

        assert cost[0, 1] > cost[0, 0]
        assert cost[1, 0] > cost[1, 1]

    def test_components_sum_to_total(self, kitti_normalizer):
        """Test every entry against an independent per-component sum."""
        rng = torch.Generator().manual_seed(3)
        boxes = GT_BOXES[torch.tensor([0, 1, 0])] + 0.3 * torch.randn(3, 7, generator=rng, dtype=torch.float64)
        boxes[:, 3:6] = boxes[:, 3:6].abs() + 0.2
        probs = torch.rand(3, 4, generator=rng, dtype=torch.float64).tolist()
        preds = _predictions(kitti_normalizer, boxes, probs)
        gts = _ground_truth(kitti_normalizer)
        weights = LossWeights()
        diag = kitti_normalizer.range_diagonal
        cost = build_cost_matrix(preds, gts, weights, diag)

        for i in range(3):
            for j in range(2):
                p = min(max(probs[i][j], 1e-7), 1 - 1e-7)
                cls = -((1 - p) ** 2) * np.log(p)
                l1 = float((preds.signal_boxes[i] - gts.signal_boxes[j]).abs().mean())
                giou = 1 - float(giou_3d_matrix(boxes[i : i + 1], GT_BOXES[j : j + 1])[0, 0])
                center = float(torch.linalg.norm(boxes[i, :3] - GT_BOXES[j, :3])) / diag
                expected = cls + 2.5 * l1 + giou + center

                assert float(cost.values[i, j]) == pytest.approx(expected, rel=1e-9)

        assert set(cost.components) == {"cls", "l1", "giou", "center"}

    def test_label_out_of_range(self, kitti_normalizer):
        preds = _predictions(kitti_normalizer, GT_BOXES.clone(), [[0.5, 0.5], [0.5, 0.5]])

        with pytest.raises(ValueError, match="classes"):
            build_cost_matrix(
                preds, _ground_truth(kitti_normalizer), LossWeights(), kitti_normalizer.range_diagonal
            )

    def test_empty_ground_truth(self, kitti_normalizer):
        preds = _predictions(kitti_normalizer, GT_BOXES.clone(), [[0.5, 0.5], [0.5, 0.5]])

        with pytest.raises(ValueError):
            build_cost_matrix(preds, GroundTruth.empty(), LossWeights(), 1.0)

    def test_focal_cost_shape(self):
        probs = torch.full((5, 4), 0.5, dtype=torch.float64)

        assert focal_cost(probs, torch.tensor([0, 2]), 2.0).shape == (5, 2)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            CostMatrix.from_values([[1.0, float("inf")]])


class TestHungarian:
    """Tests for the Hungarian matcher."""

    def test_two_by_two(self):
        """Test the [[1, 2], [3, 1]] example."""
        cost = CostMatrix.from_values([[1.0, 2.0], [3.0, 1.0]])
        result = hungarian_match(cost)

        assert result.pairs == ((0, 0), (1, 1))
        assert result.total_cost(cost) == 2.0

    def test_single_cell(self):
        assert hungarian_match(CostMatrix.from_values([[5.0]])).pairs == ((0, 0),)

    def test_matches_brute_force(self):
        """Test random 7x7 instances against exhaustive search."""
        rng = np.random.default_rng(0)
        for _ in range(20):
            values = rng.uniform(0, 10, (7, 7))
            result = hungarian_match(CostMatrix.from_values(values))

            assert result.total_cost(CostMatrix.from_values(values)) == pytest.approx(
                brute_force_min_cost(values)
            )

    def test_rectangular(self):
        """Test that more predictions than gts leaves the rest unmatched."""
        rng = np.random.default_rng(1)
        values = rng.uniform(0, 1, (5, 3))
        result = hungarian_match(CostMatrix.from_values(values))

        assert result.num_matched == 3
        assert len(result.unmatched) == 2
        assert result.gts_covered() == {0, 1, 2}
        assert result.total_cost(CostMatrix.from_values(values)) == pytest.approx(
            brute_force_min_cost(values)
        )


class TestOta:
    """Tests for the top-k OTA assigner."""

    def test_k1_on_dominant_diagonal(self):
        """Test that k = 1 on a dominant diagonal equals the Hungarian result."""
        values = np.full((4, 4), 5.0) + np.random.default_rng(2).uniform(0, 1, (4, 4))
        np.fill_diagonal(values, 0.1)
        cost = CostMatrix.from_values(values)

        assert ota_assign(cost, 1).pairs == hungarian_match(cost).pairs

    def test_single_gt_takes_top_k(self):
        """Test that one gt claims its 3 cheapest of 5 predictions."""
        cost = CostMatrix.from_values([[0.5], [0.1], [0.9], [0.3], [0.2]])
        result = ota_assign(cost, 3)

        assert result.pairs == ((1, 0), (3, 0), (4, 0))
        assert result.unmatched == (0, 2)

    def test_matches_reference(self):
        """Test a random 6x3 instance with k = 2 against a re-implementation."""
        values = np.random.default_rng(4).uniform(0, 1, (6, 3))
        result = ota_assign(CostMatrix.from_values(values), 2)

        assert dict(result.pairs) == _reference_ota(values, 2)

    def test_every_gt_covered(self):
        """Test that each gt gets a prediction when N >= M."""
        values = np.random.default_rng(5).uniform(0, 1, (8, 5))
        result = ota_assign(CostMatrix.from_values(values), 3)

        assert result.gts_covered() == set(range(5))

    def test_conflict_goes_to_cheaper_gt(self):
        """Test that a doubly claimed prediction stays with its cheaper gt."""
        cost = CostMatrix.from_values([[0.2, 0.1], [0.3, 0.9], [0.9, 0.4]])
        result = ota_assign(cost, 1)

        assert dict(result.pairs) == {0: 1, 1: 0}

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            ota_assign(CostMatrix.from_values([[1.0]]), 0)

    def test_dispatch(self):
        cost = CostMatrix.from_values([[1.0, 2.0], [3.0, 1.0]])

        assert assign(cost, "hungarian").pairs == assign(cost, "ota", 1).pairs

        with pytest.raises(ValueError):
            assign(cost, "auction")


class TestAssignment:
    """Tests for the Assignment value object."""

    def test_duplicate_prediction_rejected(self):
        with pytest.raises(ValueError):
            Assignment(pairs=((0, 0), (0, 1)), unmatched=())

    def test_from_pairs_sorts(self):
        result = Assignment.from_pairs([(3, 0), (1, 1)], 4)

        assert result.pairs == ((1, 1), (3, 0))
        assert result.unmatched == (0, 2)


class TestMatchingSymmetry:
    """Tests for how assignments respond to reordering and rescaling the cost."""

    @pytest.fixture
    def values(self):
        return np.random.default_rng(11).uniform(0, 1, (7, 4))

    @pytest.mark.parametrize("kind", ["hungarian", "ota"])
    def test_prediction_permutation_equivariance(self, values, kind):
        """Test that permuting the prediction rows permutes the assigned pairs."""
        perm = np.array([5, 2, 6, 0, 3, 1, 4])
        base = assign(CostMatrix.from_values(values), kind, 2)
        permuted = assign(CostMatrix.from_values(values[perm]), kind, 2)

        # row i of the permuted matrix is row perm[i] of the original
        remapped = {(int(perm[p]), g) for p, g in permuted.pairs}
        assert remapped == set(base.pairs)

    @pytest.mark.parametrize("kind", ["hungarian", "ota"])
    def test_positive_scaling_keeps_assignment(self, values, kind):
        """Test that scaling every cost by a positive factor leaves the assignment unchanged."""
        cost = CostMatrix.from_values(values)
        scaled = cost.scaled(3.0)

        assert assign(scaled, kind, 2).pairs == assign(cost, kind, 2).pairs
        assert assign(scaled, kind, 2).total_cost(scaled) == pytest.approx(
            3.0 * assign(cost, kind, 2).total_cost(cost)
        )
