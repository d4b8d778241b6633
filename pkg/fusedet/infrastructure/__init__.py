"""Infrastructure layer - files, synthetic data and voxelization."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .kitti import (
    KittiRecord,
    camera_box_to_world,
    parse_kitti_label,
    serialize_label,
    serialize_prediction,
    world_box_to_camera,
)
from .manifest import build_manifest, read_manifest, write_manifest
from .metric_log import MetricLog, read_csv, write_csv
from .predictions import read_predictions, write_predictions
from .repositories import DirectorySceneRepository, InMemorySceneRepository
from .synthetic import AugmentationSettings, GeneratorSettings, augment, generate_scene, scene_rng
from .voxelizer import Voxelizer, voxelize

__all__ = [
    # Checkpoints and logs
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "MetricLog",
    "read_csv",
    "write_csv",
    "build_manifest",
    "read_manifest",
    "write_manifest",
    # KITTI
    "KittiRecord",
    "parse_kitti_label",
    "serialize_label",
    "serialize_prediction",
    "camera_box_to_world",
    "world_box_to_camera",
    "read_predictions",
    "write_predictions",
    # Data
    "DirectorySceneRepository",
    "InMemorySceneRepository",
    "GeneratorSettings",
    "AugmentationSettings",
    "generate_scene",
    "augment",
    "scene_rng",
    "Voxelizer",
    "voxelize",
]
