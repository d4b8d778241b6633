"""Two-branch diffusion detector: extract once, decode many times."""

import logging
from dataclasses import dataclass

import torch
from torch import nn

from fusedet.domain.services.diffusion import clamp_signal, denormalize_boxes
from fusedet.domain.values.box_normalizer import BoxNormalizer
from fusedet.domain.values.detection import DetectionOutput

from .encoders import (
    FeatureMaps,
    ImageEncoder,
    PointEncoder,
    SceneTensors,
    gather_voxel_image_features,
)
from .roifusion import (
    DEFAULT_ROI_GRID,
    AttentionScope,
    DetectionHead,
    FusionMode,
    TimeEmbedding,
    build_fusion,
    fuse_alternative,
    nonempty_rects,
    project_boxes_to_rects,
    roi_align_2d,
    roi_align_3d,
)

logger = logging.getLogger(__name__)

BOX_GEOMETRY_FEATURES = 4  # l, w, h, yaw appended to pooled BEV features


@dataclass(frozen=True, slots=True)
class DetectorSettings:
    """Architecture hyperparameters."""

    num_classes: int = 3
    grid_size: tuple[int, int, int] = (280, 376, 25)
    image_channels: int = 64
    image_strides: tuple[int, ...] = (2, 2, 1, 1)
    voxel_channels: int = 16
    point_channels: int = 64
    bev_stride: int = 4
    d_model: int = 128
    num_heads: int = 4
    head_dim: int = 32
    roi_grid: int = DEFAULT_ROI_GRID
    fusion_mode: FusionMode = FusionMode.RES_CA
    attention_scope: AttentionScope = AttentionScope.ACROSS
    encoder_fusion: bool = True
    image_roi: bool = True
    time_embedding: bool = True
    dropout: float = 0.3

    def __post_init__(self) -> None:
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if min(self.d_model, self.num_heads, self.head_dim, self.roi_grid) < 1:
            raise ValueError("d_model, num_heads, head_dim and roi_grid must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")


@dataclass(frozen=True, eq=False)
class HeadOutput:
    """Decoder output for N proposals."""

    signal_boxes: torch.Tensor  # x0 prediction in signal space (N, 7)
    logits: torch.Tensor  # (N, C + 1)

    @property
    def probs(self) -> torch.Tensor:
        return torch.sigmoid(self.logits)

    def detections(self, normalizer: BoxNormalizer) -> DetectionOutput:
        return DetectionOutput(
            boxes=denormalize_boxes(clamp_signal(self.signal_boxes, normalizer), normalizer),
            class_probs=self.probs,
            signal_boxes=self.signal_boxes,
        )


class FusionDetector(nn.Module):
    """Image + point encoders, two RoI decoders, fusion and the detection head."""

    def __init__(self, settings: DetectorSettings, normalizer: BoxNormalizer) -> None:
        super().__init__()
        self.settings = settings
        self.normalizer = normalizer
        self.image_encoder = ImageEncoder(settings.image_channels, settings.image_strides)
        self.point_encoder = PointEncoder(
            settings.grid_size,
            image_channels=settings.image_channels,
            voxel_channels=settings.voxel_channels,
            out_channels=settings.point_channels,
            bev_stride=settings.bev_stride,
        )
        self.img_roi = nn.Linear(settings.image_channels, settings.d_model)
        self.pt_roi = nn.Linear(settings.point_channels + BOX_GEOMETRY_FEATURES, settings.d_model)
        self.fusion = build_fusion(
            settings.fusion_mode,
            settings.d_model,
            settings.num_heads,
            settings.head_dim,
            settings.attention_scope,
        )
        self.time_embed = TimeEmbedding(settings.d_model) if settings.time_embedding else None
        self.head = DetectionHead(settings.d_model, settings.num_classes, settings.dropout)
        self.extract_calls = 0

    def extract(self, scene: SceneTensors) -> FeatureMaps:
        """Encode both modalities; run once per scene regardless of timestep."""
        self.extract_calls += 1
        image_features = self.image_encoder(scene.image)
        voxel_image = None
        if self.settings.encoder_fusion:
            voxel_image = gather_voxel_image_features(
                scene, image_features, self.image_encoder.stride
            )
        bev = self.point_encoder(scene, voxel_image)
        stride = self.settings.bev_stride
        return FeatureMaps(
            image_features=image_features,
            image_stride=self.image_encoder.stride,
            image_hw=scene.image_hw,
            projection=scene.projection,
            bev_features=bev,
            bev_origin=(scene.range_min[0], scene.range_min[1]),
            bev_cell=(scene.voxel_size[0] * stride, scene.voxel_size[1] * stride),
        )

    def _metric(self, signal: torch.Tensor) -> torch.Tensor:
        return denormalize_boxes(clamp_signal(signal, self.normalizer), self.normalizer)

    def _point_roi(self, maps: FeatureMaps, boxes: torch.Tensor) -> torch.Tensor:
        pooled, on_grid = roi_align_3d(maps, boxes, self.settings.roi_grid)
        geometry = boxes[:, 3:7].to(pooled.dtype)
        feats = self.pt_roi(torch.cat([pooled, geometry], dim=1))
        return torch.where(on_grid[:, None], feats, torch.zeros_like(feats))

    def _image_roi(self, maps: FeatureMaps, boxes: torch.Tensor) -> torch.Tensor:
        rects = project_boxes_to_rects(boxes, maps.projection, maps.image_hw)
        pooled = roi_align_2d(maps.image_features, rects, maps.image_stride, self.settings.roi_grid)
        feats = self.img_roi(pooled)
        # zero for proposals outside the camera view
        return torch.where(nonempty_rects(rects)[:, None], feats, torch.zeros_like(feats))

    def fuse(self, img_feats: torch.Tensor | None, pt_feats: torch.Tensor) -> torch.Tensor:
        if img_feats is None:
            return pt_feats
        mode = self.settings.fusion_mode
        if mode in (FusionMode.RES_CA, FusionMode.CA):
            return self.fusion(img_feats, pt_feats)  # type: ignore[misc]
        return fuse_alternative(img_feats, pt_feats, mode, self.fusion)

    def decode(
        self,
        maps: FeatureMaps,
        point_signal: torch.Tensor,
        image_signal: torch.Tensor,
        t: int,
    ) -> HeadOutput:
        """Crop, fuse and predict x0 for N noisy proposals at step t.

        `point_signal` rows are refined by the head; `image_signal` rows only
        place the 2D crops.
        """
        dtype = maps.bev_features.dtype
        point_signal = point_signal.to(dtype)
        pt_feats = self._point_roi(maps, self._metric(point_signal))
        img_feats = None
        if self.settings.image_roi:
            img_feats = self._image_roi(maps, self._metric(image_signal.to(dtype)))
        fused = self.fuse(img_feats, pt_feats)
        if self.time_embed is not None:
            fused = fused + self.time_embed(t, fused)
        boxes, logits = self.head(fused, point_signal)
        return HeadOutput(signal_boxes=boxes, logits=logits)

    def forward(self, scene: SceneTensors, signal: torch.Tensor, t: int) -> HeadOutput:
        maps = self.extract(scene)
        return self.decode(maps, signal, signal, t)
