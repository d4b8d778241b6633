"""Tests for EvaluationService."""

import pytest
import torch

from fusedet.application.services import EvaluationService
from fusedet.config import EvalConfig
from fusedet.domain import DetectionOutput
from fusedet.infrastructure import read_csv


def _perfect(scene, num_classes=2):
    boxes = scene.boxes_tensor()
    probs = torch.zeros(len(boxes), num_classes + 1, dtype=torch.float64)
    probs[torch.arange(len(boxes)), scene.labels_tensor()] = 0.9
    return DetectionOutput(boxes, probs)


class TestEvaluationService:
    """Tests for scoring and result files."""

    def test_perfect_detections(self, tiny_repository, tiny_classes):
        """Test that ground truth scored as detections gives AP 1."""
        scenes = {scene.scene_id: scene for scene in tiny_repository}
        service = EvaluationService(tiny_classes, EvalConfig(interp_points=40))
        result = service.evaluate_scenes({sid: _perfect(s) for sid, s in scenes.items()}, scenes)

        assert result.map_3d == pytest.approx(1.0)
        assert result.map_bev == pytest.approx(1.0)

    def test_float32_detections(self, tiny_scene, tiny_classes):
        detections = _perfect(tiny_scene)
        as_float32 = DetectionOutput(detections.boxes.float(), detections.class_probs.float())
        result = EvaluationService(tiny_classes).evaluate_scenes(
            {tiny_scene.scene_id: as_float32}, {tiny_scene.scene_id: tiny_scene}
        )

        assert result.map_3d == pytest.approx(1.0, abs=1e-6)

    def test_write_files(self, tiny_scene, tiny_classes, tmp_path):
        """Test metrics.csv plus one PR curve per evaluated class and IoU kind."""
        service = EvaluationService(tiny_classes)
        result = service.evaluate_scenes(
            {tiny_scene.scene_id: _perfect(tiny_scene)}, {tiny_scene.scene_id: tiny_scene}
        )
        written = service.write(result, tmp_path)
        metrics = read_csv(tmp_path / "metrics.csv")

        assert len(written) == 1 + len(result.per_class)
        assert {row["iou_kind"] for row in metrics} == {"3d", "bev"}
        assert all(float(row["AP"]) == pytest.approx(1.0) for row in metrics)
        for entry in result.per_class:
            assert (tmp_path / f"pr_{entry.class_name}_{entry.iou_kind}.csv").exists()
