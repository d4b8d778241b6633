"""Domain services - pure numerical operations."""

from .clock import Clock
from .diffusion import (
    clamp_signal,
    corrupt,
    ddim_step,
    ddim_timesteps,
    denormalize,
    denormalize_boxes,
    implied_noise,
    make_schedule,
    normalize,
    normalize_boxes,
    pad_ground_truth,
    renew_boxes,
    sample_timestep,
)
from .evaluation import (
    ClassAP,
    DetectionFlags,
    EvaluationResult,
    IouKind,
    compute_ap,
    evaluate,
    match_detections,
)
from .geometry import (
    bev_intersection_area,
    box_corners,
    giou_3d,
    giou_3d_matrix,
    intersection_polygon,
    iou_3d,
    iou_3d_matrix,
    iou_bev,
    iou_bev_matrix,
    nms_bev,
    points_in_boxes,
)
from .losses import focal_loss, regression_loss, set_prediction_loss
from .matching import MatcherKind, assign, build_cost_matrix, hungarian_match, ota_assign

__all__ = [
    "Clock",
    # Geometry
    "box_corners",
    "bev_intersection_area",
    "intersection_polygon",
    "iou_3d",
    "giou_3d",
    "iou_bev",
    "iou_3d_matrix",
    "iou_bev_matrix",
    "giou_3d_matrix",
    "nms_bev",
    "points_in_boxes",
    # Diffusion
    "make_schedule",
    "normalize",
    "denormalize",
    "normalize_boxes",
    "denormalize_boxes",
    "clamp_signal",
    "corrupt",
    "implied_noise",
    "pad_ground_truth",
    "sample_timestep",
    "ddim_timesteps",
    "ddim_step",
    "renew_boxes",
    # Matching
    "MatcherKind",
    "build_cost_matrix",
    "hungarian_match",
    "ota_assign",
    "assign",
    # Losses
    "focal_loss",
    "regression_loss",
    "set_prediction_loss",
    # Evaluation
    "IouKind",
    "DetectionFlags",
    "ClassAP",
    "EvaluationResult",
    "match_detections",
    "compute_ap",
    "evaluate",
]
