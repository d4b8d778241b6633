"""Point cloud voxelization over a half-open metric range."""

import logging
from collections.abc import Sequence

import numpy as np

from fusedet.domain.values.scene import VoxelGrid, grid_dims

logger = logging.getLogger(__name__)


class Voxelizer:
    """Sparse voxelizer with a keep-first per-voxel point cap.

    Points outside [min, max) on any axis are dropped. Occupied voxels are
    returned in ascending (ix, iy, iz) order, so the output does not depend
    on input point order.
    """

    def __init__(
        self,
        voxel_size: Sequence[float],
        point_cloud_range: Sequence[float],
        max_points_per_voxel: int = 32,
    ) -> None:
        if len(voxel_size) != 3 or len(point_cloud_range) != 6:
            raise ValueError("voxel_size needs 3 values and point_cloud_range 6")
        if max_points_per_voxel < 1:
            raise ValueError(f"max_points_per_voxel must be >= 1, got {max_points_per_voxel}")
        self.voxel_size = np.asarray(voxel_size, dtype=np.float64)
        self.point_cloud_range = np.asarray(point_cloud_range, dtype=np.float64)
        self.max_points_per_voxel = max_points_per_voxel
        self.grid_size = grid_dims(point_cloud_range, voxel_size)

    def voxelize(self, points: np.ndarray) -> VoxelGrid:
        points = np.asarray(points, dtype=np.float64)
        lo, hi = self.point_cloud_range[:3], self.point_cloud_range[3:]
        dims = np.asarray(self.grid_size)

        inside = np.all((points[:, :3] >= lo) & (points[:, :3] < hi), axis=1)
        cells = np.floor((points[:, :3] - lo) / self.voxel_size).astype(np.int64)
        cells = np.clip(cells, 0, dims - 1)

        point_voxel = np.full(points.shape[0], -1, dtype=np.int64)
        kept_idx = np.flatnonzero(inside)
        if kept_idx.size == 0:
            return self._empty(point_voxel)

        keys = np.ravel_multi_index(cells[kept_idx].T, self.grid_size)
        unique_keys, inverse = np.unique(keys, return_inverse=True)

        # Rank of each point inside its voxel, in input order
        order = np.argsort(inverse, kind="stable")
        sorted_groups = inverse[order]
        first = np.searchsorted(sorted_groups, sorted_groups, side="left")
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size) - first
        capped = rank < self.max_points_per_voxel

        groups = inverse[capped]
        counts = np.bincount(groups, minlength=unique_keys.size)
        sums = np.zeros((unique_keys.size, 4), dtype=np.float64)
        np.add.at(sums, groups, points[kept_idx[capped], :4])
        features = sums / counts[:, None]

        point_voxel[kept_idx[capped]] = groups
        coords = np.stack(np.unravel_index(unique_keys, self.grid_size), axis=1).astype(np.int64)

        logger.debug(
            "Voxelized points=%d in_range=%d voxels=%d capped=%d",
            points.shape[0],
            kept_idx.size,
            unique_keys.size,
            int((~capped).sum()),
        )
        return VoxelGrid(
            coords=coords,
            features=features,
            num_points=counts,
            point_voxel=point_voxel,
            grid_size=self.grid_size,
            range_min=tuple(float(v) for v in lo),  # type: ignore[arg-type]
            voxel_size=tuple(float(v) for v in self.voxel_size),  # type: ignore[arg-type]
        )

    def _empty(self, point_voxel: np.ndarray) -> VoxelGrid:
        return VoxelGrid(
            coords=np.zeros((0, 3), dtype=np.int64),
            features=np.zeros((0, 4), dtype=np.float64),
            num_points=np.zeros((0,), dtype=np.int64),
            point_voxel=point_voxel,
            grid_size=self.grid_size,
            range_min=tuple(float(v) for v in self.point_cloud_range[:3]),  # type: ignore[arg-type]
            voxel_size=tuple(float(v) for v in self.voxel_size),  # type: ignore[arg-type]
        )


def voxelize(
    points: np.ndarray,
    point_cloud_range: Sequence[float],
    voxel_size: Sequence[float],
    max_points_per_voxel: int = 32,
) -> VoxelGrid:
    return Voxelizer(voxel_size, point_cloud_range, max_points_per_voxel).voxelize(points)
