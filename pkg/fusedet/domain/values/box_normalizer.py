"""Metric box <-> diffusion signal space mapping parameters."""

import math
from collections.abc import Sequence
from dataclasses import dataclass

DEFAULT_SIGNAL_SCALE = 2.0


@dataclass(frozen=True, slots=True)
class BoxNormalizer:
    """Affine ranges for box normalization.

    Centers map [min, max] -> [-scale, scale]; sizes map (0, max_size] ->
    (-scale, scale]; yaw maps [-pi, pi) -> [-scale, scale).
    """

    center_min: tuple[float, float, float]
    center_max: tuple[float, float, float]
    max_size: tuple[float, float, float]
    signal_scale: float = DEFAULT_SIGNAL_SCALE

    def __post_init__(self) -> None:
        for axis, (lo, hi) in enumerate(zip(self.center_min, self.center_max, strict=True)):
            if not hi > lo:
                raise ValueError(f"Range axis {axis} must have max > min, got [{lo}, {hi}]")
        if any(size <= 0 for size in self.max_size):
            raise ValueError(f"max_size must be positive, got {self.max_size}")
        if self.signal_scale <= 0:
            raise ValueError(f"signal_scale must be positive, got {self.signal_scale}")

    @classmethod
    def from_point_cloud_range(
        cls,
        point_cloud_range: Sequence[float],
        max_size: Sequence[float],
        signal_scale: float = DEFAULT_SIGNAL_SCALE,
    ) -> "BoxNormalizer":
        """Build from a voxelizer range (xmin, ymin, zmin, xmax, ymax, zmax)."""
        if len(point_cloud_range) != 6:
            raise ValueError(f"Range needs 6 values, got {len(point_cloud_range)}")
        lo = tuple(float(v) for v in point_cloud_range[:3])
        hi = tuple(float(v) for v in point_cloud_range[3:])
        return cls(
            center_min=lo,  # type: ignore[arg-type]
            center_max=hi,  # type: ignore[arg-type]
            max_size=tuple(float(v) for v in max_size),  # type: ignore[arg-type]
            signal_scale=float(signal_scale),
        )

    @property
    def range_diagonal(self) -> float:
        """Length of the diagonal of the center range (meters)."""
        return math.dist(self.center_min, self.center_max)
