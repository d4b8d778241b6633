"""Bilinear sampling of feature grids at continuous cell coordinates."""

import torch
import torch.nn.functional as F


def sample_bilinear(features: torch.Tensor, coords: torch.Tensor) -> torch.Tensor:
    """Sample (C, H, W) features at (..., 2) coords given as (col, row).

    Integer coords hit cell centers exactly; samples off the grid blend with
    zeros. Returns (..., C).
    """
    channels, height, width = features.shape
    lead = coords.shape[:-1]
    if coords.numel() == 0:
        return features.new_zeros((*lead, channels))
    flat = coords.reshape(1, -1, 1, 2).to(features.dtype)
    gx = flat[..., 0] / max(width - 1, 1) * 2.0 - 1.0
    gy = flat[..., 1] / max(height - 1, 1) * 2.0 - 1.0
    grid = torch.stack([gx, gy], dim=-1)
    out = F.grid_sample(
        features[None], grid, mode="bilinear", padding_mode="zeros", align_corners=True
    )
    return out[0, :, :, 0].transpose(0, 1).reshape(*lead, channels)
