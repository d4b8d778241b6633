"""KITTI 16-field prediction files, one per scene."""

import logging
from collections.abc import Sequence
from pathlib import Path

import torch

from fusedet.domain import DetectionOutput, Scene
from fusedet.infrastructure.kitti import (
    camera_box_to_world,
    read_labels,
    serialize_prediction,
    world_record,
    write_labels,
)

logger = logging.getLogger(__name__)


def prediction_path(directory: Path, scene_id: str) -> Path:
    return Path(directory) / f"{scene_id}.txt"


def write_predictions(
    directory: Path, scene: Scene, detections: DetectionOutput, class_names: Sequence[str]
) -> Path:
    """Write detections of one scene; an empty file when nothing survives."""
    path = prediction_path(directory, scene.scene_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    scores = detections.scores.tolist()
    labels = detections.labels.tolist()
    for box, label, score in zip(detections.to_boxes(), labels, scores, strict=True):
        record = world_record(class_names[label], box, scene.projection, scene.image_hw)
        clamped = min(max(score, 0.0), 1.0)
        if clamped != score:
            logger.warning(
                "Score outside [0, 1] clamped scene_id=%s score=%.8f", scene.scene_id, score
            )
        lines.append(serialize_prediction(record, clamped))
    write_labels(path, lines)
    return path


def read_predictions(
    directory: Path, scene_id: str, class_names: Sequence[str], dtype: torch.dtype = torch.float64
) -> DetectionOutput:
    """Predictions as a DetectionOutput whose class row holds the score.

    Unknown class names are skipped; a missing file reads as no detections.
    """
    num_classes = len(class_names)
    path = prediction_path(directory, scene_id)
    boxes: list[tuple[float, ...]] = []
    probs: list[list[float]] = []
    if path.exists():
        for record in read_labels(path):
            if record.box is None or record.class_name not in class_names:
                continue
            score = 1.0 if record.score is None else record.score
            row = [0.0] * (num_classes + 1)
            row[class_names.index(record.class_name)] = score
            row[num_classes] = 1.0 - score
            boxes.append(camera_box_to_world(record.box).as_tuple())
            probs.append(row)
    else:
        logger.warning("No prediction file scene_id=%s dir=%s", scene_id, directory)
    return DetectionOutput(
        boxes=torch.tensor(boxes, dtype=dtype).reshape(-1, 7),
        class_probs=torch.tensor(probs, dtype=dtype).reshape(-1, num_classes + 1),
    )
