"""Once-per-scene feature extraction: image encoder, point encoder and point fusion."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from fusedet.domain.values.scene import Scene, VoxelGrid

from .sampling import sample_bilinear

MIN_DEPTH = 1e-6


@dataclass(frozen=True, eq=False)
class SceneTensors:
    """Model-ready tensors of one scene and its voxel grid."""

    scene_id: str
    points: torch.Tensor  # (K, 4)
    image: torch.Tensor  # (3, H, W)
    projection: torch.Tensor  # (3, 4)
    voxel_coords: torch.Tensor  # (V, 3) long
    voxel_features: torch.Tensor  # (V, 4) mean x, y, z, intensity
    voxel_centers: torch.Tensor  # (V, 3)
    voxel_counts: torch.Tensor  # (V,)
    point_voxel: torch.Tensor  # (K,) long, -1 for dropped points
    grid_size: tuple[int, int, int]
    range_min: tuple[float, float, float]
    voxel_size: tuple[float, float, float]

    @classmethod
    def from_scene(cls, scene: Scene, grid: VoxelGrid, dtype: torch.dtype) -> "SceneTensors":
        return cls(
            scene_id=scene.scene_id,
            points=torch.as_tensor(np.asarray(scene.points, dtype=np.float64), dtype=dtype),
            image=torch.as_tensor(np.asarray(scene.image, dtype=np.float64), dtype=dtype).permute(
                2, 0, 1
            ),
            projection=torch.as_tensor(scene.projection, dtype=dtype),
            voxel_coords=torch.as_tensor(grid.coords, dtype=torch.long),
            voxel_features=torch.as_tensor(grid.features, dtype=dtype),
            voxel_centers=torch.as_tensor(grid.voxel_centers(), dtype=dtype),
            voxel_counts=torch.as_tensor(grid.num_points, dtype=dtype),
            point_voxel=torch.as_tensor(grid.point_voxel, dtype=torch.long),
            grid_size=grid.grid_size,
            range_min=grid.range_min,
            voxel_size=grid.voxel_size,
        )

    @property
    def image_hw(self) -> tuple[int, int]:
        return int(self.image.shape[1]), int(self.image.shape[2])


@dataclass(frozen=True, eq=False)
class FeatureMaps:
    """Encoded grids plus the metadata mapping world/pixel coords onto them.

    image_features: (F_i, H / stride, W / stride)
    bev_features:   (F_p, X / bev_stride, Y / bev_stride), first spatial axis is x
    """

    image_features: torch.Tensor
    image_stride: int
    image_hw: tuple[int, int]
    projection: torch.Tensor
    bev_features: torch.Tensor
    bev_origin: tuple[float, float]
    bev_cell: tuple[float, float]

    def world_to_bev(self, xy: torch.Tensor) -> torch.Tensor:
        """World (x, y) -> BEV (col, row) cell coords for `sample_bilinear`."""
        row = (xy[..., 0] - self.bev_origin[0]) / self.bev_cell[0] - 0.5
        col = (xy[..., 1] - self.bev_origin[1]) / self.bev_cell[1] - 0.5
        return torch.stack([col, row], dim=-1)


def project_points_to_image(
    points: torch.Tensor, projection: torch.Tensor, image_hw: tuple[int, int]
) -> tuple[torch.Tensor, torch.Tensor]:
    """Pinhole projection of (K, >=3) points -> (K, 2) pixel coords and validity mask.

    Points with depth <= 0 or landing outside [0, W-1] x [0, H-1] are invalid.
    """
    homogeneous = torch.cat([points[:, :3], points.new_ones((points.shape[0], 1))], dim=1)
    image = homogeneous @ projection.T
    depth = image[:, 2]
    in_front = depth > MIN_DEPTH
    safe = torch.where(in_front, depth, torch.ones_like(depth))
    uv = image[:, :2] / safe[:, None]
    h, w = image_hw
    inside = (uv[:, 0] >= 0) & (uv[:, 0] <= w - 1) & (uv[:, 1] >= 0) & (uv[:, 1] <= h - 1)
    return uv, in_front & inside


class ImageEncoder(nn.Module):
    """Small bias-free conv stack; output stride is the product of `strides`."""

    def __init__(
        self,
        out_channels: int = 64,
        strides: Sequence[int] = (2, 2, 1, 1),
        in_channels: int = 3,
    ) -> None:
        super().__init__()
        if not strides:
            raise ValueError("ImageEncoder needs at least one layer")
        layers: list[nn.Module] = []
        channels = in_channels
        for i, stride in enumerate(strides):
            layers.append(
                nn.Conv2d(channels, out_channels, 3, stride=stride, padding=1, bias=False)
            )
            if i < len(strides) - 1:
                layers.append(nn.ReLU())
            channels = out_channels
        self.net = nn.Sequential(*layers)
        self.stride = int(np.prod(list(strides)))
        self.out_channels = out_channels

    @property
    def final_layer(self) -> nn.Conv2d:
        return self.net[-1]  # type: ignore[return-value]

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        """(3, H, W) -> (F_i, H / stride, W / stride)."""
        _, h, w = image.shape
        if h % self.stride or w % self.stride:
            raise ValueError(f"Image size {h}x{w} is not divisible by stride {self.stride}")
        return self.net(image[None])[0]


class PointEncoder(nn.Module):
    """Voxel features -> BEV grid.

    Per voxel: bias-free linear over [offset from voxel center, intensity,
    mean gathered image features] then ReLU. The vertical axis is collapsed
    with one weight block per height slice (a 1x1 conv over the stacked
    slices, evaluated on occupied voxels only), followed by a patchify conv
    of size `bev_stride` and a 3x3 conv. No biases, so empty regions stay zero.
    """

    def __init__(
        self,
        grid_size: tuple[int, int, int],
        image_channels: int = 64,
        voxel_channels: int = 16,
        out_channels: int = 64,
        bev_stride: int = 1,
    ) -> None:
        super().__init__()
        nx, ny, nz = grid_size
        if nx % bev_stride or ny % bev_stride:
            raise ValueError(f"BEV grid {nx}x{ny} is not divisible by bev_stride {bev_stride}")
        self.grid_size = grid_size
        self.image_channels = image_channels
        self.bev_stride = bev_stride
        self.out_channels = out_channels
        self.voxel_proj = nn.Linear(4 + image_channels, voxel_channels, bias=False)
        self.height_weights = nn.Parameter(torch.empty(nz, out_channels, voxel_channels))
        nn.init.kaiming_uniform_(self.height_weights.view(nz * out_channels, voxel_channels))
        self.down = nn.Conv2d(out_channels, out_channels, bev_stride, stride=bev_stride, bias=False)
        self.conv = nn.Conv2d(out_channels, out_channels, 3, padding=1, bias=False)
        self.act = nn.ReLU()

    def forward(self, scene: "SceneTensors", voxel_image: torch.Tensor | None) -> torch.Tensor:
        """Returns (F_p, X / bev_stride, Y / bev_stride)."""
        nx, ny, _ = self.grid_size
        num_voxels = scene.voxel_coords.shape[0]
        dtype = self.height_weights.dtype
        if voxel_image is None:
            voxel_image = scene.voxel_features.new_zeros((num_voxels, self.image_channels))
        if voxel_image.shape != (num_voxels, self.image_channels):
            raise ValueError(
                f"Image features {tuple(voxel_image.shape)} do not match "
                f"{num_voxels} voxels x {self.image_channels} channels"
            )

        bev = self.height_weights.new_zeros((self.out_channels, nx * ny))
        if num_voxels:
            offsets = scene.voxel_features[:, :3] - scene.voxel_centers
            inputs = torch.cat([offsets, scene.voxel_features[:, 3:4], voxel_image], dim=1)
            voxel = self.act(self.voxel_proj(inputs.to(dtype)))
            weights = self.height_weights[scene.voxel_coords[:, 2]]  # (V, F_p, F_v)
            lifted = torch.einsum("vpf,vf->vp", weights, voxel)
            cells = scene.voxel_coords[:, 0] * ny + scene.voxel_coords[:, 1]
            bev = bev.index_add(1, cells, lifted.T)
        bev = self.act(bev.view(self.out_channels, nx, ny))
        bev = self.act(self.down(bev[None]))
        return self.conv(bev)[0]


def gather_voxel_image_features(
    scene: SceneTensors, image_features: torch.Tensor, image_stride: int
) -> torch.Tensor:
    """Mean bilinear image feature of the kept points in each voxel (V, F_i).

    Points that project outside the image gather zeros.
    """
    uv, valid = project_points_to_image(scene.points, scene.projection, scene.image_hw)
    coords = (uv + 0.5) / image_stride - 0.5
    per_point = sample_bilinear(image_features, coords)
    per_point = torch.where(valid[:, None], per_point, torch.zeros_like(per_point))

    num_voxels = scene.voxel_coords.shape[0]
    kept = scene.point_voxel >= 0
    sums = per_point.new_zeros((num_voxels, image_features.shape[0]))
    sums = sums.index_add(0, scene.point_voxel[kept], per_point[kept])
    counts = scene.voxel_counts.to(per_point.dtype).clamp(min=1.0)
    return sums / counts[:, None]
