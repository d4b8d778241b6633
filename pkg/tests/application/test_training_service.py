"""Tests for TrainingService."""

import dataclasses
import math

import pytest
import torch

from fusedet.application.services import EvaluationService, InferenceService, TrainingService
from fusedet.application.services.selftest_service import tiny_detector
from fusedet.application.services.training_service import (
    BEST_CHECKPOINT,
    LAST_CHECKPOINT,
    prefetch,
)
from fusedet.config import EvalConfig, InferConfig, MatchConfig, TrainConfig
from fusedet.domain import LossWeights, TrainingDivergedError
from fusedet.domain.services import make_schedule
from fusedet.infrastructure import InMemorySceneRepository, MetricLog, load_checkpoint
from fusedet.model import FusionDetector, FusionMode


def _service(model, normalizer, voxelizer, validation=False, **train):
    schedule = make_schedule("cosine", 1000)
    inference = evaluation = None
    if validation:
        inference = InferenceService(
            model, schedule, normalizer, voxelizer, InferConfig(d_steps=1, num_proposals=4), torch.float64
        )
        evaluation = EvaluationService(["Car", "Pedestrian"])
    settings = {"num_proposals": 8, "epochs": 1, "lr": 1e-3, "prefetch": 1, "loader_workers": 1, **train}
    return TrainingService(
        model,
        schedule,
        normalizer,
        voxelizer,
        TrainConfig(**settings),
        MatchConfig(),
        LossWeights(),
        dtype=torch.float64,
        inference=inference,
        evaluation=evaluation,
        config_echo={"train": settings},
    )


def _overfit_map(model, normalizer, voxelizer, scene, steps):
    """Train on one scene, then sample and score that same scene at IoU 0.5."""
    service = _service(model, normalizer, voxelizer, lr=3e-3)
    generator = torch.Generator().manual_seed(0)
    for _ in range(steps):
        service.train_step([scene], generator)

    inference = InferenceService(
        model,
        make_schedule("cosine", 1000),
        normalizer,
        voxelizer,
        InferConfig(d_steps=4, num_proposals=16, nms=True),
        torch.float64,
    )
    detections = {scene.scene_id: inference.infer(scene)}
    evaluation = EvaluationService(["Car", "Pedestrian"], EvalConfig(iou_threshold=0.5))
    return evaluation.evaluate_scenes(detections, {scene.scene_id: scene})


@pytest.fixture
def service(tiny):
    return _service(*tiny)


class TestComputeLoss:
    """Tests for the per-scene loss."""

    def test_finite_with_matches(self, service, tiny_scene, generator):
        loss = service.compute_loss(tiny_scene, generator)

        assert torch.isfinite(loss.total)
        assert loss.num_matched >= tiny_scene.num_objects
        assert loss.total.requires_grad

    def test_diverged_head_raises(self, service, tiny_scene, generator):
        """Test that a non-finite head output raises with the scene id."""
        with torch.no_grad():
            service.model.head.cls.weight.fill_(math.nan)

        with pytest.raises(TrainingDivergedError, match=tiny_scene.scene_id):
            service.compute_loss(tiny_scene, generator)


class TestTrainStep:
    """Tests for one optimizer update."""

    def test_updates_parameters(self, service, tiny_scene, generator):
        before = service.model.head.cls.weight.detach().clone()
        loss = service.train_step([tiny_scene], generator)

        assert torch.isfinite(loss.total)
        assert not torch.equal(service.model.head.cls.weight, before)

    def test_empty_batch(self, service, generator):
        with pytest.raises(ValueError, match="at least one scene"):
            service.train_step([], generator)


class TestTrain:
    """Tests for the epoch loop, logging and checkpoints."""

    def test_writes_log_and_checkpoints(self, tiny, tiny_repository, tmp_path):
        """Test one log row per epoch plus last/best checkpoints."""
        report = _service(*tiny, epochs=2, batch_size=2).train(tiny_repository, tmp_path)
        rows = MetricLog(tmp_path / "train_log.csv").rows()

        assert report.epochs_run == 2
        assert report.steps == 4
        assert [row["epoch"] for row in rows] == ["0", "1"]
        assert (tmp_path / LAST_CHECKPOINT).exists()
        assert (tmp_path / BEST_CHECKPOINT).exists()
        assert load_checkpoint(tmp_path / LAST_CHECKPOINT).epoch == 2

    def test_max_steps(self, tiny, tiny_repository, tmp_path):
        report = _service(*tiny, epochs=5, max_steps=3).train(tiny_repository, tmp_path)

        assert report.steps == 3
        assert report.epochs_run == 1
        assert len(report.step_losses) == 3

    def test_empty_dataset(self, service, tmp_path):
        with pytest.raises(ValueError, match="empty"):
            service.train(InMemorySceneRepository(), tmp_path)

    def test_validation_metrics_logged(self, tiny, tiny_repository, tmp_path):
        service = _service(*tiny, validation=True, max_steps=1)
        report = service.train(tiny_repository, tmp_path, val_repository=tiny_repository)
        row = MetricLog(tmp_path / "train_log.csv").rows()[0]

        assert 0.0 <= float(row["val_map_3d"]) <= 1.0
        assert report.best_map == pytest.approx(float(row["val_map_3d"]))

    def test_validate_without_wiring(self, service, tiny_repository):
        map_3d, map_bev = service.validate(tiny_repository)

        assert math.isnan(map_3d)
        assert math.isnan(map_bev)

    def test_resume_is_bitwise(self, tiny_repository, tmp_path):
        """Test that stopping after one epoch and resuming matches an uninterrupted run."""
        torch.manual_seed(0)
        straight = tiny_detector()
        _service(*straight, epochs=2, batch_size=2).train(tiny_repository, tmp_path / "straight")

        torch.manual_seed(0)
        first = tiny_detector()
        _service(*first, epochs=1, batch_size=2).train(tiny_repository, tmp_path / "split")
        torch.manual_seed(1)
        second = tiny_detector()
        _service(
            *second, epochs=2, batch_size=2, resume=str(tmp_path / "split" / LAST_CHECKPOINT)
        ).train(tiny_repository, tmp_path / "resumed")

        for (name, a), (_, b) in zip(
            straight[0].named_parameters(), second[0].named_parameters(), strict=True
        ):
            assert torch.equal(a, b), name


class TestPrefetch:
    """Tests for the background scene loader."""

    def test_keeps_order(self):
        ids = [f"{i:06d}" for i in range(7)]

        assert list(prefetch(ids, lambda scene_id: scene_id, depth=3, workers=2)) == ids

    def test_empty(self):
        assert list(prefetch([], lambda scene_id: scene_id, depth=2, workers=1)) == []


@pytest.mark.slow
class TestOverfit:
    """Slow end-to-end checks on a single scene."""

    def test_loss_decreases(self, tiny, tiny_scene):
        """Test that repeated steps on one scene lower the loss."""
        service = _service(*tiny, lr=3e-3)
        generator = torch.Generator().manual_seed(0)
        losses = [float(service.train_step([tiny_scene], generator).total) for _ in range(200)]

        assert sum(losses[-20:]) / 20 < sum(losses[:20]) / 20

    def test_overfit_scene_is_detected(self, tiny, tiny_scene):
        """Test that a model trained on one scene detects its objects there."""
        result = _overfit_map(*tiny, tiny_scene, steps=800)

        assert result.map_bev >= 0.8
        assert result.map_3d >= 0.8


@pytest.mark.slow
class TestAblationTrend:
    """Slow comparison of fusion variants under an identical small budget."""

    def test_residual_attention_with_image_keeps_up(self, tiny, tiny_scene):
        """Test that res_ca with the image branch is not behind the other variants."""
        base, normalizer, voxelizer = tiny
        scores = {}
        variants = ((FusionMode.RES_CA, True), (FusionMode.SUM, True), (FusionMode.RES_CA, False))
        for mode, image_roi in variants:
            torch.manual_seed(0)
            settings = dataclasses.replace(
                base.settings, fusion_mode=mode, image_roi=image_roi, encoder_fusion=image_roi
            )
            model = FusionDetector(settings, normalizer).to(torch.float64)
            scores[(mode, image_roi)] = _overfit_map(
                model, normalizer, voxelizer, tiny_scene, steps=400
            ).map_bev

        full = scores[(FusionMode.RES_CA, True)]
        # small budgets are noisy, so only a clear regression fails
        assert full >= max(scores.values()) - 0.15
        assert full >= scores[(FusionMode.RES_CA, False)] - 0.15
