"""Dependency container - holds all wired dependencies."""

from dataclasses import dataclass
from pathlib import Path

import torch

from fusedet.application.services import (
    DatasetService,
    EvaluationService,
    InferenceService,
    SelftestService,
    TrainingService,
)
from fusedet.config import RunConfig
from fusedet.domain import BoxNormalizer, DiffusionSchedule
from fusedet.infrastructure import GeneratorSettings, Voxelizer
from fusedet.model import FusionDetector


@dataclass(frozen=True)
class Container:
    """Immutable dependency container.

    All dependencies are wired once per run; the model instance is shared
    by the training and inference services.
    """

    # Configuration
    config: RunConfig
    dtype: torch.dtype
    output_root: Path

    # Numerics
    schedule: DiffusionSchedule
    normalizer: BoxNormalizer
    voxelizer: Voxelizer
    generator_settings: GeneratorSettings
    model: FusionDetector

    # Services
    training_service: TrainingService
    inference_service: InferenceService
    evaluation_service: EvaluationService
    dataset_service: DatasetService
    selftest_service: SelftestService
