"""Composition root - the ONLY place where dependencies are wired."""

import copy
import functools
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np
import torch
from pydantic import ValidationError

from fusedet.application.services import (
    AblationCell,
    AblationService,
    DatasetService,
    EvaluationService,
    InferenceService,
    SelftestService,
    TrainingService,
)
from fusedet.application.services.training_service import Augmenter
from fusedet.config import RunConfig, apply_overrides, load_config, output_root
from fusedet.container import Container
from fusedet.domain import BoxNormalizer, ConfigError, LossWeights, Scene
from fusedet.domain.services import make_schedule
from fusedet.infrastructure import (
    AugmentationSettings,
    DirectorySceneRepository,
    GeneratorSettings,
    Voxelizer,
    augment,
    generate_scene,
    load_checkpoint,
    scene_rng,
)
from fusedet.model import AttentionScope, DetectorSettings, FusionDetector, FusionMode

logger = logging.getLogger(__name__)

DTYPES = {"float32": torch.float32, "float64": torch.float64}


def create_detector_settings(config: RunConfig, grid_size: tuple[int, int, int]) -> DetectorSettings:
    m = config.model
    return DetectorSettings(
        num_classes=len(config.data.class_names),
        grid_size=grid_size,
        image_channels=m.image_channels,
        image_strides=tuple(m.image_strides),
        voxel_channels=m.voxel_channels,
        point_channels=m.point_channels,
        bev_stride=m.bev_stride,
        d_model=m.d_model,
        num_heads=m.num_heads,
        head_dim=m.head_dim,
        roi_grid=m.roi_grid,
        fusion_mode=FusionMode(m.fusion_mode),
        attention_scope=AttentionScope(m.attention_scope),
        encoder_fusion=m.encoder_fusion,
        image_roi=m.image_roi,
        time_embedding=m.time_embedding,
        dropout=config.train.dropout,
    )


def create_generator_settings(config: RunConfig) -> GeneratorSettings:
    d = config.data
    return GeneratorSettings(
        class_names=tuple(d.class_names),
        point_cloud_range=tuple(d.point_cloud_range),  # type: ignore[arg-type]
        image_height=d.image_height,
        image_width=d.image_width,
        focal_length=d.focal_length,
        min_objects=d.min_objects,
        max_objects=d.max_objects,
        points_per_object=d.points_per_object,
        clutter_points=d.clutter_points,
        point_noise=d.point_noise,
        image_noise=d.image_noise,
    )


def create_augmenter(config: RunConfig, settings: GeneratorSettings) -> Augmenter | None:
    d = config.data
    if not d.aug_enabled:
        return None
    aug = AugmentationSettings(
        flip_prob=d.aug_flip_prob,
        max_rotation=d.aug_max_rotation,
        scale_range=tuple(d.aug_scale_range),  # type: ignore[arg-type]
        translation_std=d.aug_translation_std,
    )

    def augmenter(scene: Scene, rng: np.random.Generator) -> Scene:
        return augment(scene, aug, settings, rng)

    return augmenter


def create_repository(root: Path | str, config: RunConfig) -> DirectorySceneRepository:
    return DirectorySceneRepository(
        Path(root), config.data.class_names, config.data.point_cloud_range
    )


def create_container(
    config: RunConfig | None = None,
    config_path: Path | str | None = None,
    overrides: dict[str, Any] | None = None,
) -> Container:
    """Create the dependency container with all wired dependencies.

    Args:
        config: Already validated config; loaded from file when None.
        config_path: Path to config file, or None to search standard locations.
        overrides: Dotted key overrides applied before validation.

    Returns:
        Fully wired dependency container.
    """
    if config is None:
        config = load_config(config_path, overrides)

    dtype = DTYPES[config.model.dtype]
    d = config.data
    schedule = make_schedule(
        config.diffusion.schedule, config.diffusion.num_steps, config.diffusion.paper_literal_noise
    )
    normalizer = BoxNormalizer.from_point_cloud_range(
        d.point_cloud_range, d.max_box_size, d.signal_scale
    )
    voxelizer = Voxelizer(d.voxel_size, d.point_cloud_range, d.max_points_per_voxel)
    generator_settings = create_generator_settings(config)

    torch.manual_seed(config.train.seed)
    model = FusionDetector(create_detector_settings(config, voxelizer.grid_size), normalizer).to(dtype)

    inference_service = InferenceService(
        model=model,
        schedule=schedule,
        normalizer=normalizer,
        voxelizer=voxelizer,
        settings=config.infer,
        dtype=dtype,
    )
    evaluation_service = EvaluationService(d.class_names, config.eval)
    training_service = TrainingService(
        model=model,
        schedule=schedule,
        normalizer=normalizer,
        voxelizer=voxelizer,
        settings=config.train,
        matching=config.match,
        weights=LossWeights(**config.loss.model_dump()),
        dtype=dtype,
        augmenter=create_augmenter(config, generator_settings),
        inference=inference_service,
        evaluation=evaluation_service,
        config_echo=config.model_dump(mode="json"),
    )

    def generate(rng: np.random.Generator, scene_id: str) -> Scene:
        return generate_scene(generator_settings, rng, scene_id)

    dataset_service = DatasetService(
        generate=generate,
        repository_factory=lambda root: create_repository(root, config),
        rng_factory=scene_rng,
    )

    return Container(
        config=config,
        dtype=dtype,
        output_root=output_root(),
        schedule=schedule,
        normalizer=normalizer,
        voxelizer=voxelizer,
        generator_settings=generator_settings,
        model=model,
        training_service=training_service,
        inference_service=inference_service,
        evaluation_service=evaluation_service,
        dataset_service=dataset_service,
        selftest_service=SelftestService(config.selftest),
    )


def create_container_from_checkpoint(
    checkpoint_path: Path | str, overrides: dict[str, Any] | None = None
) -> Container:
    """Container whose config and weights come from a saved checkpoint.

    Overrides apply on top of the stored config, so sampling and evaluation
    knobs can change while the architecture stays as trained.
    """
    checkpoint = load_checkpoint(Path(checkpoint_path))
    data = apply_overrides(copy.deepcopy(checkpoint.config), overrides or {})
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    container = create_container(config)
    checkpoint.restore(container.model)
    logger.info(
        "Model restored checkpoint=%s epoch=%d step=%d", checkpoint_path, checkpoint.epoch, checkpoint.step
    )
    return container


def cell_config(config: dict[str, Any], cell: AblationCell) -> RunConfig:
    """Run config of one ablation cell; the image-branch switch covers both fusion points."""
    base = RunConfig.model_validate(config)
    data = base.model_dump()
    data["model"].update(
        fusion_mode=cell.fusion_mode,
        image_roi=cell.image_roi,
        encoder_fusion=cell.image_roi and base.model.encoder_fusion,
    )
    steps = base.ablate.train_steps
    num_train = max(base.data.num_train, 1)
    data["train"].update(
        seed=cell.seed,
        max_steps=steps,
        epochs=max(1, math.ceil(steps * base.train.batch_size / num_train)),
        resume=None,
    )
    return RunConfig.model_validate(data)


def run_ablation_cell(
    config: dict[str, Any], dataset_root: str, output_dir: str, cell: AblationCell
) -> list[dict[str, Any]]:
    """Train one cell, then evaluate every (d_steps, num_proposals) pair on held-out scenes."""
    run_config = cell_config(config, cell)
    container = create_container(run_config)
    train_repo = create_repository(Path(dataset_root) / "train", run_config)
    val_repo = create_repository(Path(dataset_root) / "val", run_config)
    container.training_service.train(train_repo, Path(output_dir) / cell.label)

    ids = val_repo.scene_ids()[: run_config.ablate.num_scenes]
    scenes = {scene_id: val_repo.get(scene_id) for scene_id in ids}
    rows = []
    for d_steps in run_config.ablate.d_steps:
        for proposals in run_config.ablate.num_proposals:
            settings = run_config.infer.model_copy(
                update={"d_steps": d_steps, "num_proposals": proposals, "seed": cell.seed}
            )
            report = container.inference_service.with_settings(settings).run(scenes.values())
            result = container.evaluation_service.evaluate_scenes(report.detections, scenes)
            rows.append(
                {
                    "fusion_mode": cell.fusion_mode,
                    "image_roi": cell.image_roi,
                    "seed": cell.seed,
                    "d_steps": d_steps,
                    "num_proposals": proposals,
                    "map_3d": result.map_3d,
                    "map_bev": result.map_bev,
                    "latency_s": report.latency_s,
                }
            )
    return rows


def create_ablation_service(
    config: RunConfig, dataset_root: Path | str, output_dir: Path | str
) -> AblationService:
    runner = functools.partial(
        run_ablation_cell, config.model_dump(mode="json"), str(dataset_root), str(output_dir)
    )
    return AblationService(runner, config.ablate)
