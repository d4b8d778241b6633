"""Corrupted proposal set value object."""

from dataclasses import dataclass

import torch

from .box3d import BOX_DIM


@dataclass(frozen=True, eq=False)
class NoisyBoxSet:
    """N signal-space boxes at timestep t; `pad_mask` marks rows not taken from ground truth."""

    boxes: torch.Tensor
    t: int
    pad_mask: torch.Tensor

    def __post_init__(self) -> None:
        if self.boxes.ndim != 2 or self.boxes.shape[1] != BOX_DIM:
            raise ValueError(f"boxes must be N x {BOX_DIM}, got {tuple(self.boxes.shape)}")
        if self.pad_mask.shape != (self.boxes.shape[0],) or self.pad_mask.dtype != torch.bool:
            raise ValueError("pad_mask must be a boolean vector with one entry per box")
        if self.t < 0:
            raise ValueError(f"Timestep must be >= 0, got {self.t}")
        if not bool(torch.isfinite(self.boxes).all()):
            raise ValueError("Noisy boxes must be finite")

    def __len__(self) -> int:
        return int(self.boxes.shape[0])

    @property
    def num_padded(self) -> int:
        return int(self.pad_mask.sum())
