"""Evaluation service - AP tables and PR-curve files."""

import logging
from collections.abc import Mapping
from pathlib import Path

import torch

from fusedet.config import EvalConfig
from fusedet.domain import DetectionOutput, Difficulty, GroundTruth, Scene
from fusedet.domain.services import EvaluationResult, evaluate
from fusedet.infrastructure.metric_log import METRICS_FIELDS, PR_FIELDS, write_csv

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"


def ground_truth(scene: Scene, dtype: torch.dtype = torch.float64) -> GroundTruth:
    return GroundTruth(
        boxes=scene.boxes_tensor(dtype),
        labels=scene.labels_tensor(),
        aux=scene.gt_aux,
    )


class EvaluationService:
    """Scores detections against scene labels and writes the result files."""

    def __init__(self, class_names: list[str] | tuple[str, ...], settings: EvalConfig | None = None) -> None:
        self._class_names = tuple(class_names)
        self._settings = settings or EvalConfig()

    def evaluate(
        self,
        detections: Mapping[str, DetectionOutput],
        ground_truths: Mapping[str, GroundTruth],
    ) -> EvaluationResult:
        cfg = self._settings
        difficulty = Difficulty(cfg.difficulty) if cfg.difficulty else None
        as_float64 = {
            scene_id: DetectionOutput(
                boxes=d.boxes.detach().to(torch.float64),
                class_probs=d.class_probs.detach().to(torch.float64),
            )
            for scene_id, d in detections.items()
        }
        return evaluate(
            as_float64,
            ground_truths,
            self._class_names,
            iou_threshold=cfg.iou_threshold,
            interp_points=cfg.interp_points,
            difficulty=difficulty,
        )

    def evaluate_scenes(
        self, detections: Mapping[str, DetectionOutput], scenes: Mapping[str, Scene]
    ) -> EvaluationResult:
        return self.evaluate(detections, {sid: ground_truth(s) for sid, s in scenes.items()})

    def write(self, result: EvaluationResult, directory: Path) -> list[Path]:
        """metrics.csv (class, iou_kind, AP, num_gt) plus one pr_<class>_<kind>.csv per row."""
        directory = Path(directory)
        written = [write_csv(directory / METRICS_FILE, METRICS_FIELDS, result.rows())]
        for entry in result.per_class:
            path = directory / f"pr_{entry.class_name}_{entry.iou_kind}.csv"
            rows = [{"recall": r, "precision": p} for r, p in entry.curve.rows()]
            written.append(write_csv(path, PR_FIELDS, rows))
        logger.info("Evaluation files written dir=%s files=%d", directory, len(written))
        return written
