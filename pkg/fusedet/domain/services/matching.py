"""Prediction-to-ground-truth assignment: cost matrix, Hungarian and top-k OTA."""

import logging
from enum import StrEnum

import torch
from scipy.optimize import linear_sum_assignment

from ..values.assignment import Assignment, CostMatrix
from ..values.detection import DetectionOutput, GroundTruth
from ..values.loss_weights import LossWeights
from .geometry import giou_3d_matrix

logger = logging.getLogger(__name__)

PROB_EPS = 1e-7
DEFAULT_TOP_K = 3


class MatcherKind(StrEnum):
    HUNGARIAN = "hungarian"
    OTA = "ota"


def focal_cost(probs: torch.Tensor, labels: torch.Tensor, gamma: float) -> torch.Tensor:
    """Positive focal term -(1 - p)^gamma log p at each gt's class: (N, M)."""
    p = probs[:, labels].clamp(PROB_EPS, 1.0 - PROB_EPS)
    return -((1.0 - p) ** gamma) * torch.log(p)


def center_distance(pred: torch.Tensor, gt: torch.Tensor, range_diagonal: float) -> torch.Tensor:
    """Pairwise metric center distance over the range diagonal: (N, M)."""
    return torch.cdist(pred[:, :3], gt[:, :3]) / range_diagonal


def build_cost_matrix(
    preds: DetectionOutput,
    gts: GroundTruth,
    weights: LossWeights,
    range_diagonal: float,
) -> CostMatrix:
    """cost = cls_w * focal + l1_w * L1 + giou_w * (1 - GIoU) + center_w * center.

    L1 uses signal-space boxes; GIoU and center distance use metric boxes.
    """
    if len(preds) < 1 or len(gts) < 1:
        raise ValueError(f"Need N >= 1 and M >= 1, got N={len(preds)} M={len(gts)}")
    if preds.signal_boxes is None or gts.signal_boxes is None:
        raise ValueError("Cost matrix needs signal-space boxes for predictions and gts")
    if int(gts.labels.max()) >= preds.num_classes or int(gts.labels.min()) < 0:
        raise ValueError(
            f"gt labels {gts.labels.tolist()} do not fit {preds.num_classes} classes"
        )

    cls = weights.cls_weight * focal_cost(preds.class_probs, gts.labels, weights.gamma)
    l1 = weights.l1_weight * torch.cdist(preds.signal_boxes, gts.signal_boxes, p=1) / 7.0
    giou = weights.giou_weight * (1.0 - giou_3d_matrix(preds.boxes, gts.boxes))
    center = weights.center_weight * center_distance(preds.boxes, gts.boxes, range_diagonal)
    values = cls + l1 + giou + center
    return CostMatrix(values=values, components={"cls": cls, "l1": l1, "giou": giou, "center": center})


def hungarian_match(cost: CostMatrix) -> Assignment:
    """Optimal one-to-one assignment over min(N, M) pairs."""
    matrix = cost.values.detach().cpu().to(torch.float64).numpy()
    rows, cols = linear_sum_assignment(matrix)
    return Assignment.from_pairs(zip(rows.tolist(), cols.tolist(), strict=True), cost.num_predictions)


def ota_assign(cost: CostMatrix, k: int = DEFAULT_TOP_K) -> Assignment:
    """Top-k many-to-one assignment with greedy conflict resolution.

    Each gt claims its k cheapest predictions. A prediction claimed twice
    stays with the gt it is cheapest for (lower gt index on ties). A gt left
    empty takes its cheapest free prediction, or one from a gt holding more
    than one.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    values = cost.values.detach().cpu().to(torch.float64)
    num_preds, num_gt = values.shape
    ranked = [
        torch.sort(values[:, j], stable=True).indices.tolist() for j in range(num_gt)
    ]

    owner: dict[int, int] = {}
    for j in range(num_gt):
        for p in ranked[j][: min(k, num_preds)]:
            current = owner.get(p)
            if current is None or float(values[p, j]) < float(values[p, current]):
                owner[p] = j

    held: dict[int, list[int]] = {j: [] for j in range(num_gt)}
    for p, j in owner.items():
        held[j].append(p)

    for j in range(num_gt):
        if held[j]:
            continue
        for p in ranked[j]:
            donor = owner.get(p)
            if donor is None or len(held[donor]) > 1:
                if donor is not None:
                    held[donor].remove(p)
                owner[p] = j
                held[j].append(p)
                break
        else:
            logger.debug("OTA gt=%d left unassigned num_preds=%d", j, num_preds)

    return Assignment.from_pairs(((p, j) for p, j in owner.items()), num_preds)


def assign(cost: CostMatrix, kind: MatcherKind | str, k: int = DEFAULT_TOP_K) -> Assignment:
    if MatcherKind(kind) is MatcherKind.HUNGARIAN:
        return hungarian_match(cost)
    return ota_assign(cost, k)
