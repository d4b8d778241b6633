"""Set-prediction training objective: focal classification plus L1 / GIoU / center regression."""

import torch

from ..values.assignment import Assignment
from ..values.box3d import Box3D
from ..values.box_normalizer import BoxNormalizer
from ..values.detection import DetectionOutput, GroundTruth
from ..values.loss_weights import LossBreakdown, LossWeights
from .diffusion import normalize
from .geometry import giou_3d_pairs

PROB_EPS = 1e-7


def focal_loss(probs: torch.Tensor, targets: torch.Tensor, gamma: float) -> torch.Tensor:
    """Sigmoid focal loss summed over classes and averaged over the N rows."""
    p = probs.clamp(PROB_EPS, 1.0 - PROB_EPS)
    positive = targets * (1.0 - p) ** gamma * torch.log(p)
    negative = (1.0 - targets) * p**gamma * torch.log(1.0 - p)
    return -(positive + negative).sum() / max(probs.shape[0], 1)


def _safe_norm(diff: torch.Tensor) -> torch.Tensor:
    squared = (diff**2).sum(dim=-1)
    positive = squared > 0
    root = torch.sqrt(torch.where(positive, squared, torch.ones_like(squared)))
    return torch.where(positive, root, torch.zeros_like(squared))


def regression_loss(
    pred_signal: torch.Tensor,
    pred_metric: torch.Tensor,
    gt_signal: torch.Tensor,
    gt_metric: torch.Tensor,
    range_diagonal: float,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Unweighted (l1, giou, center) terms averaged over row-aligned pairs."""
    if pred_signal.shape[0] == 0:
        zero = pred_signal.sum() * 0.0
        return zero, zero, zero
    l1 = (pred_signal - gt_signal).abs().mean(dim=-1).mean()
    giou = (1.0 - giou_3d_pairs(pred_metric, gt_metric)).mean()
    center = (_safe_norm(pred_metric[:, :3] - gt_metric[:, :3]) / range_diagonal).mean()
    return l1, giou, center


def box_regression_loss(
    pred: Box3D, gt: Box3D, normalizer: BoxNormalizer
) -> tuple[float, float, float]:
    """Regression terms for a single box pair."""
    pred_metric = torch.tensor([pred.as_tuple()], dtype=torch.float64)
    gt_metric = torch.tensor([gt.as_tuple()], dtype=torch.float64)
    l1, giou, center = regression_loss(
        normalize(pred, normalizer)[None],
        pred_metric,
        normalize(gt, normalizer)[None],
        gt_metric,
        normalizer.range_diagonal,
    )
    return float(l1), float(giou), float(center)


def classification_targets(
    num_predictions: int, num_classes: int, gts: GroundTruth, assignment: Assignment, like: torch.Tensor
) -> torch.Tensor:
    """One-hot (N, C + 1) targets; unmatched rows point at the "no object" column."""
    targets = like.new_zeros((num_predictions, num_classes + 1))
    classes = torch.full((num_predictions,), num_classes, dtype=torch.long, device=like.device)
    if assignment.num_matched:
        classes[assignment.pred_indices()] = gts.labels[assignment.gt_indices()].to(like.device)
    targets[torch.arange(num_predictions, device=like.device), classes] = 1.0
    return targets


def set_prediction_loss(
    preds: DetectionOutput,
    gts: GroundTruth,
    assignment: Assignment,
    weights: LossWeights,
    range_diagonal: float,
) -> LossBreakdown:
    """Classification over all N predictions, regression over matched pairs."""
    targets = classification_targets(
        len(preds), preds.num_classes, gts, assignment, preds.class_probs
    )
    cls = focal_loss(preds.class_probs, targets, weights.gamma)

    if assignment.num_matched:
        if preds.signal_boxes is None or gts.signal_boxes is None:
            raise ValueError("Regression loss needs signal-space boxes")
        pi, gi = assignment.pred_indices(), assignment.gt_indices()
        l1, giou, center = regression_loss(
            preds.signal_boxes[pi],
            preds.boxes[pi],
            gts.signal_boxes[gi],
            gts.boxes[gi],
            range_diagonal,
        )
    else:
        zero = preds.boxes.sum() * 0.0
        l1 = giou = center = zero

    return LossBreakdown.compose(cls, l1, giou, center, weights, assignment.num_matched)
