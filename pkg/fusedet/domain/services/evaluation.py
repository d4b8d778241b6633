"""Average precision for 3D and BEV IoU in the KITTI manner."""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import torch

from ..values.detection import DetectionOutput, GroundTruth
from ..values.difficulty import Difficulty, admits
from ..values.pr_curve import PRCurve
from .geometry import iou_3d_matrix, iou_bev_matrix

logger = logging.getLogger(__name__)

DEFAULT_IOU_THRESHOLD = 0.7


class IouKind(StrEnum):
    BEV = "bev"
    THREE_D = "3d"


_IOU_FUNCTIONS = {IouKind.BEV: iou_bev_matrix, IouKind.THREE_D: iou_3d_matrix}


@dataclass(frozen=True, slots=True)
class DetectionFlags:
    """Greedy matching outcome, in descending score order.

    `order` maps each row back to the input detection index. Ignored rows
    matched a gt excluded from the current stratum.
    """

    order: tuple[int, ...]
    scores: tuple[float, ...]
    true_positive: tuple[bool, ...]
    ignored: tuple[bool, ...]

    @property
    def num_tp(self) -> int:
        return sum(self.true_positive)

    @property
    def num_fp(self) -> int:
        return sum(
            1 for tp, ign in zip(self.true_positive, self.ignored, strict=True) if not (tp or ign)
        )


def match_detections(
    det_boxes: torch.Tensor,
    det_scores: torch.Tensor,
    gt_boxes: torch.Tensor,
    iou_kind: IouKind | str,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    gt_ignore: Sequence[bool] | None = None,
) -> DetectionFlags:
    """Greedy score-ordered matching; each gt is matched at most once.

    Score ties keep the input detection order.
    """
    order = torch.sort(det_scores, descending=True, stable=True).indices.tolist()
    num_gt = int(gt_boxes.shape[0])
    ignore = list(gt_ignore) if gt_ignore is not None else [False] * num_gt
    if len(ignore) != num_gt:
        raise ValueError("gt_ignore must have one flag per gt")

    if det_boxes.shape[0] and num_gt:
        ious = _IOU_FUNCTIONS[IouKind(iou_kind)](det_boxes.detach(), gt_boxes.detach())
    else:
        ious = torch.zeros((det_boxes.shape[0], num_gt), dtype=torch.float64)

    taken = [False] * num_gt
    true_positive: list[bool] = []
    ignored: list[bool] = []
    for d in order:
        best_gt, best_iou = -1, iou_threshold
        for g in range(num_gt):
            if taken[g]:
                continue
            value = float(ious[d, g])
            if value >= best_iou and (best_gt < 0 or value > best_iou):
                best_gt, best_iou = g, value
        if best_gt < 0:
            true_positive.append(False)
            ignored.append(False)
            continue
        taken[best_gt] = True
        true_positive.append(not ignore[best_gt])
        ignored.append(ignore[best_gt])

    return DetectionFlags(
        order=tuple(order),
        scores=tuple(float(det_scores[d]) for d in order),
        true_positive=tuple(true_positive),
        ignored=tuple(ignored),
    )


def recall_positions(interp_points: int) -> torch.Tensor:
    if interp_points == 11:
        return torch.linspace(0.0, 1.0, 11, dtype=torch.float64)
    if interp_points == 40:
        return torch.linspace(1.0 / 40.0, 1.0, 40, dtype=torch.float64)
    raise ValueError(f"interp_points must be 11 or 40, got {interp_points}")


def compute_ap(
    flags: Sequence[bool],
    scores: Sequence[float],
    num_gt: int,
    interp_points: int = 40,
) -> PRCurve | None:
    """Interpolated AP over score-sorted TP flags; None when there is no gt."""
    positions = recall_positions(interp_points)
    if num_gt < 0:
        raise ValueError(f"num_gt must be >= 0, got {num_gt}")
    if num_gt == 0:
        return None
    if len(flags) != len(scores):
        raise ValueError("flags and scores must have equal length")

    order = torch.sort(
        torch.tensor(list(scores), dtype=torch.float64), descending=True, stable=True
    ).indices
    tp = torch.tensor([bool(flags[i]) for i in order.tolist()], dtype=torch.float64)
    if tp.numel() == 0:
        return PRCurve(recall=(), precision=(), ap=0.0, num_gt=num_gt, interp_points=interp_points)

    tp_cum = torch.cumsum(tp, dim=0)
    fp_cum = torch.cumsum(1.0 - tp, dim=0)
    recall = tp_cum / num_gt
    precision = tp_cum / (tp_cum + fp_cum)

    # Interpolated precision: best precision at any recall >= r
    reached = recall[None, :] >= positions[:, None] - 1e-12
    interpolated = torch.where(reached, precision[None, :], torch.zeros_like(precision)[None, :])
    ap = float(interpolated.max(dim=1).values.mean())
    return PRCurve(
        recall=tuple(recall.tolist()),
        precision=tuple(precision.tolist()),
        ap=min(max(ap, 0.0), 1.0),
        num_gt=num_gt,
        interp_points=interp_points,
    )


@dataclass(frozen=True, slots=True)
class ClassAP:
    class_name: str
    iou_kind: IouKind
    ap: float
    num_gt: int
    curve: PRCurve


@dataclass(frozen=True)
class EvaluationResult:
    """Per-class AP for both IoU kinds plus the means over evaluated classes."""

    map_3d: float
    map_bev: float
    per_class: list[ClassAP] = field(default_factory=list)
    skipped_classes: list[str] = field(default_factory=list)
    difficulty: Difficulty | None = None

    def rows(self) -> list[dict[str, object]]:
        return [
            {"class": c.class_name, "iou_kind": str(c.iou_kind), "AP": c.ap, "num_gt": c.num_gt}
            for c in self.per_class
        ]


def _class_ap(
    dets: Mapping[str, DetectionOutput],
    gts: Mapping[str, GroundTruth],
    class_index: int,
    iou_kind: IouKind,
    iou_threshold: float,
    interp_points: int,
    difficulty: Difficulty | None,
) -> PRCurve | None:
    scores: list[float] = []
    flags: list[bool] = []
    num_gt = 0
    for scene_id in sorted(gts):
        gt = gts[scene_id]
        det = dets[scene_id]
        gt_mask = gt.labels == class_index
        gt_boxes = gt.boxes[gt_mask]
        ignore: list[bool] | None = None
        if difficulty is not None and gt.aux is not None:
            aux = [a for a, keep in zip(gt.aux, gt_mask.tolist(), strict=True) if keep]
            ignore = [not admits(difficulty, a) for a in aux]
        num_gt += len(ignore) - sum(ignore) if ignore is not None else int(gt_boxes.shape[0])

        det_mask = det.labels == class_index
        outcome = match_detections(
            det.boxes[det_mask], det.scores[det_mask], gt_boxes, iou_kind, iou_threshold, ignore
        )
        for score, tp, ign in zip(
            outcome.scores, outcome.true_positive, outcome.ignored, strict=True
        ):
            if not ign:
                scores.append(score)
                flags.append(tp)
    return compute_ap(flags, scores, num_gt, interp_points)


def evaluate(
    dets: Mapping[str, DetectionOutput],
    gts: Mapping[str, GroundTruth],
    class_names: Sequence[str],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    interp_points: int = 40,
    difficulty: Difficulty | None = None,
) -> EvaluationResult:
    """mAP over classes with at least one gt, for 3D and BEV IoU."""
    if set(dets) != set(gts):
        missing = sorted(set(dets) ^ set(gts))
        raise ValueError(f"Scene ids differ between detections and ground truth: {missing}")

    per_class: list[ClassAP] = []
    skipped: list[str] = []
    means: dict[IouKind, list[float]] = {IouKind.THREE_D: [], IouKind.BEV: []}
    for class_index, name in enumerate(class_names):
        for kind in (IouKind.THREE_D, IouKind.BEV):
            curve = _class_ap(
                dets, gts, class_index, kind, iou_threshold, interp_points, difficulty
            )
            if curve is None:
                if name not in skipped:
                    skipped.append(name)
                continue
            per_class.append(ClassAP(name, kind, curve.ap, curve.num_gt, curve))
            means[kind].append(curve.ap)

    def mean(values: list[float]) -> float:
        return sum(values) / len(values) if values else 0.0

    result = EvaluationResult(
        map_3d=mean(means[IouKind.THREE_D]),
        map_bev=mean(means[IouKind.BEV]),
        per_class=per_class,
        skipped_classes=skipped,
        difficulty=difficulty,
    )
    logger.info(
        "Evaluated scenes=%d map_3d=%.4f map_bev=%.4f skipped=%s",
        len(gts),
        result.map_3d,
        result.map_bev,
        ",".join(skipped) or "-",
    )
    return result
