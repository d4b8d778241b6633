"""Training service - corrupt, decode, assign, loss, update."""

import logging
import math
from collections import deque
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import torch
from torch import nn

from fusedet.config import MatchConfig, TrainConfig
from fusedet.domain import (
    Assignment,
    BoxNormalizer,
    DiffusionSchedule,
    GroundTruth,
    LossBreakdown,
    LossWeights,
    NoisyBoxSet,
    Scene,
    TrainingDivergedError,
)
from fusedet.domain.ports import SceneRepository
from fusedet.domain.services import (
    Clock,
    assign,
    build_cost_matrix,
    clamp_signal,
    corrupt,
    normalize_boxes,
    pad_ground_truth,
    sample_timestep,
    set_prediction_loss,
)
from fusedet.infrastructure.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from fusedet.infrastructure.metric_log import MetricLog
from fusedet.infrastructure.voxelizer import Voxelizer

from .evaluation_service import EvaluationService
from .inference_service import InferenceService, PerfCounterClock, scene_tensors

logger = logging.getLogger(__name__)

LAST_CHECKPOINT = "last.pt"
BEST_CHECKPOINT = "best.pt"
TRAIN_LOG = "train_log.csv"

Augmenter = Callable[[Scene, np.random.Generator], Scene]


@dataclass
class TrainingReport:
    epochs_run: int = 0
    steps: int = 0
    best_map: float = float("-inf")
    step_losses: list[float] = field(default_factory=list)
    log_path: Path | None = None
    last_checkpoint: Path | None = None
    best_checkpoint: Path | None = None


def prefetch(
    ids: Sequence[str], load: Callable[[str], Scene], depth: int, workers: int
) -> Iterator[Scene]:
    """Yield scenes in `ids` order with at most `depth` loads in flight."""
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="scene-loader") as pool:
        pending: deque[Future[Scene]] = deque()
        remaining = iter(ids)
        for scene_id in remaining:
            pending.append(pool.submit(load, scene_id))
            if len(pending) >= depth:
                break
        while pending:
            scene = pending.popleft().result()
            next_id = next(remaining, None)
            if next_id is not None:
                pending.append(pool.submit(load, next_id))
            yield scene


class TrainingService:
    """Owns the optimizer of one FusionDetector.

    Every scene of a batch contributes its loss divided by the batch size;
    a single Adam update follows the batch.
    """

    def __init__(
        self,
        model: nn.Module,
        schedule: DiffusionSchedule,
        normalizer: BoxNormalizer,
        voxelizer: Voxelizer,
        settings: TrainConfig,
        matching: MatchConfig,
        weights: LossWeights,
        dtype: torch.dtype = torch.float32,
        augmenter: Augmenter | None = None,
        inference: InferenceService | None = None,
        evaluation: EvaluationService | None = None,
        config_echo: dict[str, Any] | None = None,
        clock: Clock | None = None,
    ) -> None:
        self._model = model
        self._schedule = schedule
        self._normalizer = normalizer
        self._voxelizer = voxelizer
        self._settings = settings
        self._matching = matching
        self._weights = weights
        self._dtype = dtype
        self._augmenter = augmenter
        self._inference = inference
        self._evaluation = evaluation
        self._config_echo = config_echo or {}
        self._clock = clock or PerfCounterClock()
        self.optimizer = torch.optim.Adam(
            model.parameters(), lr=settings.lr, betas=tuple(settings.betas)
        )

    @property
    def model(self) -> nn.Module:
        return self._model

    def _corrupt_branch(
        self, padded: torch.Tensor, pad_mask: torch.Tensor, t: int, generator: torch.Generator
    ) -> NoisyBoxSet:
        noise = torch.randn(padded.shape, generator=generator, dtype=self._dtype)
        boxes = clamp_signal(corrupt(padded, t, noise, self._schedule), self._normalizer)
        return NoisyBoxSet(boxes=boxes, t=t, pad_mask=pad_mask)

    def compute_loss(self, scene: Scene, generator: torch.Generator) -> LossBreakdown:
        """Loss of one scene at a random timestep; gradients are left to the caller."""
        cfg = self._settings
        tensors = scene_tensors(scene, self._voxelizer, self._dtype)
        maps = self._model.extract(tensors)

        gt_boxes = scene.boxes_tensor(self._dtype)
        gt_signal = normalize_boxes(gt_boxes, self._normalizer)
        padded, pad_mask = pad_ground_truth(gt_signal, cfg.num_proposals, generator)
        t = sample_timestep(self._schedule, generator)
        point_set = self._corrupt_branch(padded, pad_mask, t, generator)
        image_set = self._corrupt_branch(padded, pad_mask, t, generator)

        out = self._model.decode(maps, point_set.boxes, image_set.boxes, t)
        if not (torch.isfinite(out.signal_boxes).all() and torch.isfinite(out.logits).all()):
            raise TrainingDivergedError(scene.scene_id, t, "non-finite head output")
        preds = out.detections(self._normalizer)
        gts = GroundTruth(boxes=gt_boxes, labels=scene.labels_tensor(), signal_boxes=gt_signal)

        if len(gts):
            with torch.no_grad():
                cost = build_cost_matrix(
                    preds.detach(), gts, self._weights, self._normalizer.range_diagonal
                )
            assignment = assign(cost, self._matching.kind, self._matching.top_k)
        else:
            assignment = Assignment.from_pairs([], len(preds))

        loss = set_prediction_loss(
            preds, gts, assignment, self._weights, self._normalizer.range_diagonal
        )
        if not torch.isfinite(loss.total):
            raise TrainingDivergedError(scene.scene_id, t)
        logger.debug(
            "Scene loss scene_id=%s t=%d total=%.4f matched=%d",
            scene.scene_id,
            t,
            float(loss.total),
            loss.num_matched,
        )
        return loss

    def train_step(self, scenes: Sequence[Scene], generator: torch.Generator) -> LossBreakdown:
        if not scenes:
            raise ValueError("train_step needs at least one scene")
        self._model.train()
        self.optimizer.zero_grad(set_to_none=True)
        parts = []
        for scene in scenes:
            loss = self.compute_loss(scene, generator)
            (loss.total / len(scenes)).backward()
            parts.append(loss)
        nn.utils.clip_grad_norm_(self._model.parameters(), self._settings.grad_clip)
        self.optimizer.step()
        return LossBreakdown.mean(parts)

    def _epoch_order(self, ids: Sequence[str], epoch: int) -> list[str]:
        rng = np.random.default_rng([self._settings.seed, epoch])
        return [ids[i] for i in rng.permutation(len(ids))]

    def _batches(self, repository: SceneRepository, epoch: int) -> Iterator[list[Scene]]:
        cfg = self._settings
        ids = self._epoch_order(repository.scene_ids(), epoch)
        batch: list[Scene] = []
        for index, scene in enumerate(
            prefetch(ids, repository.get, cfg.prefetch, cfg.loader_workers)
        ):
            if self._augmenter is not None:
                scene = self._augmenter(scene, np.random.default_rng([cfg.seed, epoch, index]))
            batch.append(scene)
            if len(batch) == cfg.batch_size:
                yield batch
                batch = []
        if batch:
            yield batch

    def validate(self, repository: SceneRepository | None) -> tuple[float, float]:
        """(mAP_3D, mAP_BEV) on the validation set; NaN when no validation is wired."""
        if repository is None or self._inference is None or self._evaluation is None:
            return math.nan, math.nan
        scenes = {scene.scene_id: scene for scene in repository}
        report = self._inference.run(scenes.values())
        result = self._evaluation.evaluate_scenes(report.detections, scenes)
        return result.map_3d, result.map_bev

    def _checkpoint(self, epoch: int, step: int, best: float, generator: torch.Generator) -> Checkpoint:
        checkpoint = Checkpoint.capture(
            self._model, self._config_echo, self.optimizer, epoch, step, best, generator
        )
        checkpoint.extra["torch_rng"] = torch.get_rng_state()
        return checkpoint

    def resume(self, path: Path, generator: torch.Generator) -> Checkpoint:
        checkpoint = load_checkpoint(path)
        checkpoint.restore(self._model, self.optimizer, generator)
        if "torch_rng" in checkpoint.extra:
            torch.set_rng_state(checkpoint.extra["torch_rng"])
        logger.info("Resumed path=%s epoch=%d step=%d", path, checkpoint.epoch, checkpoint.step)
        return checkpoint

    def train(
        self,
        train_repository: SceneRepository,
        output_dir: Path,
        val_repository: SceneRepository | None = None,
    ) -> TrainingReport:
        """Epoch loop with per-epoch validation, last/best checkpoints and a CSV log."""
        cfg = self._settings
        if len(train_repository) == 0:
            raise ValueError("Training dataset is empty")

        output_dir = Path(output_dir)
        torch.manual_seed(cfg.seed)
        generator = torch.Generator().manual_seed(cfg.seed)
        report = TrainingReport(log_path=output_dir / TRAIN_LOG)
        log = MetricLog(report.log_path)

        start_epoch = 0
        if cfg.resume:
            checkpoint = self.resume(Path(cfg.resume), generator)
            start_epoch, report.steps, report.best_map = (
                checkpoint.epoch,
                checkpoint.step,
                checkpoint.best_map,
            )

        started = self._clock.now()
        for epoch in range(start_epoch, cfg.epochs):
            epoch_losses: list[LossBreakdown] = []
            for batch in self._batches(train_repository, epoch):
                loss = self.train_step(batch, generator)
                report.steps += 1
                report.step_losses.append(float(loss.total))
                epoch_losses.append(loss)
                logger.debug(
                    "Train step epoch=%d step=%d total=%.4f", epoch, report.steps, float(loss.total)
                )
                if cfg.max_steps is not None and report.steps >= cfg.max_steps:
                    break

            val_3d, val_bev = self.validate(val_repository)
            record = LossBreakdown.mean(epoch_losses).to_record() if epoch_losses else {}
            log.append(
                {
                    "epoch": epoch,
                    "step": report.steps,
                    **record,
                    "val_map_3d": val_3d,
                    "val_map_bev": val_bev,
                    "wall_time_s": round(self._clock.now() - started, 3),
                }
            )
            report.epochs_run += 1

            score = val_3d if not math.isnan(val_3d) else -record.get("total", math.inf)
            improved = score > report.best_map
            if improved:
                report.best_map = score
            checkpoint = self._checkpoint(epoch + 1, report.steps, report.best_map, generator)
            report.last_checkpoint = save_checkpoint(checkpoint, output_dir / LAST_CHECKPOINT)
            if improved:
                report.best_checkpoint = save_checkpoint(checkpoint, output_dir / BEST_CHECKPOINT)
            logger.info(
                "Epoch done epoch=%d steps=%d val_map_3d=%.4f val_map_bev=%.4f",
                epoch,
                report.steps,
                val_3d,
                val_bev,
            )
            if cfg.max_steps is not None and report.steps >= cfg.max_steps:
                break

        if report.best_checkpoint is None and (output_dir / BEST_CHECKPOINT).exists():
            report.best_checkpoint = output_dir / BEST_CHECKPOINT
        return report
