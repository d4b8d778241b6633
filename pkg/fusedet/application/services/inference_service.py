"""Inference service - multi-step DDIM sampling from Gaussian proposals."""

import logging
import time
from collections.abc import Iterable
from dataclasses import dataclass, field

import torch

from fusedet.application.ports import Denoiser
from fusedet.config import InferConfig
from fusedet.domain import BoxNormalizer, DetectionOutput, DiffusionSchedule, Scene
from fusedet.domain.services import (
    Clock,
    clamp_signal,
    ddim_step,
    ddim_timesteps,
    denormalize_boxes,
    nms_bev,
    renew_boxes,
)
from fusedet.domain.values.box3d import BOX_DIM
from fusedet.domain.values.diffusion_schedule import CLEAN_TIMESTEP
from fusedet.infrastructure.voxelizer import Voxelizer
from fusedet.model import SceneTensors

logger = logging.getLogger(__name__)


class PerfCounterClock:
    """Clock implementation using the monotonic performance counter."""

    def now(self) -> float:
        return time.perf_counter()


def scene_tensors(scene: Scene, voxelizer: Voxelizer, dtype: torch.dtype) -> SceneTensors:
    return SceneTensors.from_scene(scene, voxelizer.voxelize(scene.points), dtype)


@dataclass
class InferenceReport:
    """Detections of a scene batch plus mean wall time per scene."""

    detections: dict[str, DetectionOutput] = field(default_factory=dict)
    latency_s: float = 0.0


class InferenceService:
    """Runs the DDIM loop: encode once, decode once per sampling step.

    Both RoI branches read the same proposal set at inference. The head runs
    at every step since DDIM needs an x0 estimate to move to the next step.
    """

    def __init__(
        self,
        model: Denoiser,
        schedule: DiffusionSchedule,
        normalizer: BoxNormalizer,
        voxelizer: Voxelizer,
        settings: InferConfig | None = None,
        dtype: torch.dtype = torch.float32,
        clock: Clock | None = None,
    ) -> None:
        self._model = model
        self._schedule = schedule
        self._normalizer = normalizer
        self._voxelizer = voxelizer
        self._settings = settings or InferConfig()
        self._dtype = dtype
        self._clock = clock or PerfCounterClock()

    @property
    def settings(self) -> InferConfig:
        return self._settings

    def with_settings(self, settings: InferConfig) -> "InferenceService":
        """Same model and schedule, different sampling knobs."""
        return InferenceService(
            self._model,
            self._schedule,
            self._normalizer,
            self._voxelizer,
            settings,
            self._dtype,
            self._clock,
        )

    @torch.no_grad()
    def sample(self, tensors: SceneTensors, generator: torch.Generator) -> DetectionOutput:
        """Raw sampler output for all proposals, before thresholding."""
        cfg = self._settings
        self._model.eval()
        maps = self._model.extract(tensors)
        u = torch.randn((cfg.num_proposals, BOX_DIM), generator=generator, dtype=self._dtype)

        steps = ddim_timesteps(self._schedule.num_steps, cfg.d_steps)
        out = None
        for t, t_prev in steps:
            out = self._model.decode(maps, u, u, t)
            x0 = clamp_signal(out.signal_boxes, self._normalizer)
            u = ddim_step(u, x0, t, t_prev, self._schedule)
            if cfg.box_renewal and t_prev != CLEAN_TIMESTEP:
                probs = out.probs
                scores = probs[:, : probs.shape[1] - 1].max(dim=1).values
                u = renew_boxes(u, scores > cfg.renewal_threshold, generator)
            logger.debug("DDIM step t=%d t_prev=%d", t, t_prev)

        assert out is not None  # ddim_timesteps yields at least one pair
        x0 = clamp_signal(out.signal_boxes, self._normalizer)
        return DetectionOutput(
            boxes=denormalize_boxes(x0, self._normalizer),
            class_probs=out.probs,
            signal_boxes=x0,
        )

    def postprocess(self, raw: DetectionOutput) -> DetectionOutput:
        """Score threshold, then optional class-agnostic BEV NMS."""
        cfg = self._settings
        kept = raw.select(raw.scores >= cfg.score_threshold)
        if cfg.nms and len(kept):
            kept = kept.select(nms_bev(kept.boxes, kept.scores, cfg.nms_iou))
        return kept

    def infer(self, scene: Scene) -> DetectionOutput:
        generator = torch.Generator().manual_seed(self._settings.seed)
        raw = self.sample(scene_tensors(scene, self._voxelizer, self._dtype), generator)
        detections = self.postprocess(raw)
        logger.debug(
            "Inferred scene_id=%s proposals=%d kept=%d", scene.scene_id, len(raw), len(detections)
        )
        return detections

    def run(self, scenes: Iterable[Scene]) -> InferenceReport:
        """Infer every scene; latency covers sampling and post-processing only."""
        report = InferenceReport()
        elapsed = 0.0
        for scene in scenes:
            generator = torch.Generator().manual_seed(self._settings.seed)
            tensors = scene_tensors(scene, self._voxelizer, self._dtype)
            start = self._clock.now()
            detections = self.postprocess(self.sample(tensors, generator))
            elapsed += self._clock.now() - start
            report.detections[scene.scene_id] = detections
        count = len(report.detections)
        report.latency_s = elapsed / count if count else 0.0
        logger.info(
            "Inference done scenes=%d d_steps=%d proposals=%d latency_s=%.4f",
            count,
            self._settings.d_steps,
            self._settings.num_proposals,
            report.latency_s,
        )
        return report
