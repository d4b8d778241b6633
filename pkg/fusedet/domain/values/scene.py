"""Scene and voxel grid value objects."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import torch

from .box3d import Box3D

POINT_DIM = 4  # x, y, z, intensity


@dataclass(frozen=True, slots=True)
class ObjectAux:
    """KITTI annotation fields used for difficulty strata."""

    truncated: float
    occluded: int
    bbox: tuple[float, float, float, float]  # x1, y1, x2, y2 pixels

    @property
    def bbox_height(self) -> float:
        return self.bbox[3] - self.bbox[1]


@dataclass(frozen=True, eq=False)
class Scene:
    """One sample: LiDAR points, camera image, projection and labels.

    Invariants:
    - points is K x 4 with K >= 1
    - image is H x W x 3 with values in [0, 1]
    - projection is 3 x 4 (homogeneous world point -> pixel)
    - one label per box, labels in [0, num_classes)
    """

    scene_id: str
    points: np.ndarray
    image: np.ndarray
    projection: np.ndarray
    gt_boxes: tuple[Box3D, ...]
    gt_labels: tuple[int, ...]
    gt_aux: tuple[ObjectAux, ...] | None = None

    def __post_init__(self) -> None:
        if self.points.ndim != 2 or self.points.shape[1] != POINT_DIM:
            raise ValueError(f"points must be K x {POINT_DIM}, got {self.points.shape}")
        if self.points.shape[0] < 1:
            raise ValueError("Scene must contain at least one point")
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise ValueError(f"image must be H x W x 3, got {self.image.shape}")
        if self.image.size and (self.image.min() < 0.0 or self.image.max() > 1.0):
            raise ValueError("image values must lie in [0, 1]")
        if self.projection.shape != (3, 4):
            raise ValueError(f"projection must be 3 x 4, got {self.projection.shape}")
        if len(self.gt_boxes) != len(self.gt_labels):
            raise ValueError(
                f"Got {len(self.gt_boxes)} boxes but {len(self.gt_labels)} labels"
            )
        if any(label < 0 for label in self.gt_labels):
            raise ValueError("Class labels must be non-negative")
        if self.gt_aux is not None and len(self.gt_aux) != len(self.gt_boxes):
            raise ValueError("gt_aux must have one entry per box")

    @property
    def num_objects(self) -> int:
        return len(self.gt_boxes)

    @property
    def image_hw(self) -> tuple[int, int]:
        return int(self.image.shape[0]), int(self.image.shape[1])

    def boxes_tensor(self, dtype: torch.dtype = torch.float64) -> torch.Tensor:
        """Ground-truth boxes as an M x 7 tensor."""
        if not self.gt_boxes:
            return torch.zeros((0, 7), dtype=dtype)
        return torch.tensor([b.as_tuple() for b in self.gt_boxes], dtype=dtype)

    def labels_tensor(self) -> torch.Tensor:
        return torch.tensor(self.gt_labels, dtype=torch.long)


def grid_dims(point_cloud_range: Sequence[float], voxel_size: Sequence[float]) -> tuple[int, int, int]:
    """Voxel grid dimensions: round((max - min) / size) per axis."""
    lo = np.asarray(point_cloud_range[:3], dtype=np.float64)
    hi = np.asarray(point_cloud_range[3:], dtype=np.float64)
    size = np.asarray(voxel_size, dtype=np.float64)
    if np.any(size <= 0):
        raise ValueError(f"voxel_size must be positive, got {tuple(voxel_size)}")
    dims = np.round((hi - lo) / size).astype(np.int64)
    return int(dims[0]), int(dims[1]), int(dims[2])


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Sparse voxel grid over a half-open metric range.

    Only occupied voxels are stored: `coords` (V x 3, ix/iy/iz) and
    `features` (V x 4, mean x/y/z/intensity of the kept points). `dense()`
    materializes the X x Y x Z x F tensor. `point_voxel[k]` is the voxel row
    of input point k, or -1 when the point was dropped (out of range or over
    the per-voxel cap).
    """

    coords: np.ndarray
    features: np.ndarray
    num_points: np.ndarray
    point_voxel: np.ndarray
    grid_size: tuple[int, int, int]
    range_min: tuple[float, float, float]
    voxel_size: tuple[float, float, float]

    def __post_init__(self) -> None:
        if self.coords.ndim != 2 or self.coords.shape[1] != 3:
            raise ValueError(f"coords must be V x 3, got {self.coords.shape}")
        if self.features.shape[0] != self.coords.shape[0]:
            raise ValueError("features and coords must have the same voxel count")
        if self.num_points.shape[0] != self.coords.shape[0]:
            raise ValueError("num_points and coords must have the same voxel count")

    @property
    def num_voxels(self) -> int:
        return int(self.coords.shape[0])

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    def voxel_centers(self) -> np.ndarray:
        """Metric centers of the occupied voxels (V x 3)."""
        lo = np.asarray(self.range_min)
        size = np.asarray(self.voxel_size)
        return lo + (self.coords + 0.5) * size

    def dense(self) -> np.ndarray:
        grid = np.zeros((*self.grid_size, self.num_features), dtype=self.features.dtype)
        ix, iy, iz = self.coords.T
        grid[ix, iy, iz] = self.features
        return grid

    def occupancy(self) -> np.ndarray:
        mask = np.zeros(self.grid_size, dtype=bool)
        ix, iy, iz = self.coords.T
        mask[ix, iy, iz] = True
        return mask
