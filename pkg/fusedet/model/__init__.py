"""Torch modules: encoders, RoI fusion and the detector."""

from .detector import DetectorSettings, FusionDetector, HeadOutput
from .encoders import (
    FeatureMaps,
    ImageEncoder,
    PointEncoder,
    SceneTensors,
    gather_voxel_image_features,
    project_points_to_image,
)
from .roifusion import (
    AttentionScope,
    CrossAttentionFusion,
    DetectionHead,
    FusionMode,
    fuse_alternative,
    project_boxes_to_rects,
    roi_align_2d,
    roi_align_3d,
)
from .sampling import sample_bilinear

__all__ = [
    "DetectorSettings",
    "FusionDetector",
    "HeadOutput",
    "FeatureMaps",
    "SceneTensors",
    "ImageEncoder",
    "PointEncoder",
    "gather_voxel_image_features",
    "project_points_to_image",
    "AttentionScope",
    "FusionMode",
    "CrossAttentionFusion",
    "DetectionHead",
    "fuse_alternative",
    "roi_align_2d",
    "roi_align_3d",
    "project_boxes_to_rects",
    "sample_bilinear",
]
