"""Per-proposal RoI cropping, cross-attention fusion and the detection head."""

import math
from enum import StrEnum

import torch
from torch import nn

from fusedet.domain.services.geometry import corners_3d

from .encoders import FeatureMaps
from .sampling import sample_bilinear

DEFAULT_ROI_GRID = 7
PRIOR_PROB = 0.01
MIN_RECT_DEPTH = 0.1


class FusionMode(StrEnum):
    RES_CA = "res_ca"
    CA = "ca"
    SUM = "sum"
    CONCAT = "concat"
    DP = "dp"
    MLP = "mlp"


class AttentionScope(StrEnum):
    ACROSS = "across"
    DIAGONAL = "diagonal"


# RoI cropping


def _grid_fractions(grid: int, like: torch.Tensor) -> torch.Tensor:
    return (torch.arange(grid, dtype=like.dtype, device=like.device) + 0.5) / grid


def nonempty_rects(rects: torch.Tensor) -> torch.Tensor:
    """Mask of (x1, y1, x2, y2) rects with positive area."""
    return ((rects[:, 2] - rects[:, 0]) > 0) & ((rects[:, 3] - rects[:, 1]) > 0)


def roi_align_2d(
    image_features: torch.Tensor, rects: torch.Tensor, image_stride: int, grid: int = DEFAULT_ROI_GRID
) -> torch.Tensor:
    """Mean of G x G bilinear samples inside each pixel rect (N, 4) -> (N, F_i).

    Rects are (x1, y1, x2, y2) in pixels; zero-area rects give zeros.
    """
    frac = _grid_fractions(grid, rects)
    x1, y1, x2, y2 = rects.unbind(dim=1)
    xs = x1[:, None] + frac[None, :] * (x2 - x1)[:, None]  # (N, G)
    ys = y1[:, None] + frac[None, :] * (y2 - y1)[:, None]
    u = xs[:, None, :].expand(-1, grid, -1)
    v = ys[:, :, None].expand(-1, -1, grid)
    coords = (torch.stack([u, v], dim=-1) + 0.5) / image_stride - 0.5
    pooled = sample_bilinear(image_features, coords).mean(dim=(1, 2))
    return torch.where(nonempty_rects(rects)[:, None], pooled, torch.zeros_like(pooled))


def project_boxes_to_rects(
    boxes: torch.Tensor, projection: torch.Tensor, image_hw: tuple[int, int]
) -> torch.Tensor:
    """Pixel bounding rects (N, 4) of projected 3D box corners, clipped to the image.

    Boxes entirely behind the camera get a zero-area rect.
    """
    corners = corners_3d(boxes)  # (N, 8, 3)
    homogeneous = torch.cat([corners, corners.new_ones((*corners.shape[:2], 1))], dim=-1)
    image = homogeneous @ projection.T
    depth = image[..., 2]
    visible = (depth > MIN_RECT_DEPTH).any(dim=1)
    uv = image[..., :2] / depth.clamp(min=MIN_RECT_DEPTH)[..., None]
    h, w = image_hw
    upper = uv.new_tensor([w - 1, h - 1])
    low = torch.minimum(torch.maximum(uv.amin(dim=1), uv.new_zeros(2)), upper)
    high = torch.minimum(torch.maximum(uv.amax(dim=1), uv.new_zeros(2)), upper)
    rects = torch.cat([low, high], dim=1)
    return torch.where(visible[:, None], rects, torch.zeros_like(rects))


def roi_align_3d(
    maps: FeatureMaps, boxes: torch.Tensor, grid: int = DEFAULT_ROI_GRID
) -> tuple[torch.Tensor, torch.Tensor]:
    """Mean of G x G bilinear samples over each rotated footprint -> (N, F_p).

    Also returns a mask of boxes with at least one sample on the BEV grid.
    """
    frac = _grid_fractions(grid, boxes) - 0.5
    lx = frac[None, None, :] * boxes[:, 3, None, None]  # (N, 1, G)
    ly = frac[None, :, None] * boxes[:, 4, None, None]  # (N, G, 1)
    lx, ly = torch.broadcast_tensors(lx, ly)
    cos = torch.cos(boxes[:, 6])[:, None, None]
    sin = torch.sin(boxes[:, 6])[:, None, None]
    x = cos * lx - sin * ly + boxes[:, 0, None, None]
    y = sin * lx + cos * ly + boxes[:, 1, None, None]
    cells = maps.world_to_bev(torch.stack([x, y], dim=-1))  # (N, G, G, 2) as (col, row)
    _, rows, cols = maps.bev_features.shape
    on_grid = (
        (cells[..., 0] > -1) & (cells[..., 0] < cols) & (cells[..., 1] > -1) & (cells[..., 1] < rows)
    ).flatten(1).any(dim=1)
    pooled = sample_bilinear(maps.bev_features, cells).mean(dim=(1, 2))
    return pooled, on_grid


# Fusion


class CrossAttentionFusion(nn.Module):
    """Multi-head cross-attention: queries from the image branch, keys/values from points.

    With `residual` the point-branch feature is added to the projected output.
    """

    def __init__(
        self,
        d_model: int = 128,
        num_heads: int = 4,
        head_dim: int = 32,
        scope: AttentionScope | str = AttentionScope.ACROSS,
        residual: bool = True,
    ) -> None:
        super().__init__()
        self.num_heads = num_heads
        self.head_dim = head_dim
        self.scope = AttentionScope(scope)
        self.residual = residual
        inner = num_heads * head_dim
        self.w_q = nn.Linear(d_model, inner, bias=False)
        self.w_k = nn.Linear(d_model, inner, bias=False)
        self.w_v = nn.Linear(d_model, inner, bias=False)
        self.w_out = nn.Linear(inner, d_model, bias=False)

    def _heads(self, x: torch.Tensor) -> torch.Tensor:
        return x.view(x.shape[0], self.num_heads, self.head_dim).transpose(0, 1)  # (H, N, d)

    def attention_weights(self, img_feats: torch.Tensor, pt_feats: torch.Tensor) -> torch.Tensor:
        """Softmax weights (heads, N, N); diagonal scope gives identity rows."""
        if img_feats.shape != pt_feats.shape:
            raise ValueError(
                f"Branch shapes differ: {tuple(img_feats.shape)} vs {tuple(pt_feats.shape)}"
            )
        n = img_feats.shape[0]
        if self.scope is AttentionScope.DIAGONAL:
            eye = torch.eye(n, dtype=img_feats.dtype, device=img_feats.device)
            return eye.expand(self.num_heads, n, n)
        q = self._heads(self.w_q(img_feats))
        k = self._heads(self.w_k(pt_feats))
        scores = q @ k.transpose(1, 2) / math.sqrt(self.head_dim)
        return torch.softmax(scores, dim=-1)

    def forward(self, img_feats: torch.Tensor, pt_feats: torch.Tensor) -> torch.Tensor:
        weights = self.attention_weights(img_feats, pt_feats)
        v = self._heads(self.w_v(pt_feats))
        attended = (weights @ v).transpose(0, 1).reshape(pt_feats.shape[0], -1)
        out = self.w_out(attended)
        return out + pt_feats if self.residual else out


def fuse_alternative(
    img_feats: torch.Tensor,
    pt_feats: torch.Tensor,
    mode: FusionMode | str,
    module: nn.Module | None = None,
) -> torch.Tensor:
    """Parameter-free (sum, dp) or concatenation-based (concat, mlp) fusion."""
    if img_feats.shape != pt_feats.shape:
        raise ValueError(f"Branch shapes differ: {tuple(img_feats.shape)} vs {tuple(pt_feats.shape)}")
    mode = FusionMode(mode)
    if mode is FusionMode.SUM:
        return img_feats + pt_feats
    if mode is FusionMode.DP:
        return img_feats * pt_feats
    if mode in (FusionMode.CONCAT, FusionMode.MLP):
        if module is None:
            raise ValueError(f"Fusion mode {mode} needs its projection module")
        return module(torch.cat([img_feats, pt_feats], dim=-1))
    raise ValueError(f"Not an alternative fusion mode: {mode}")


def build_fusion(mode: FusionMode | str, d_model: int, num_heads: int, head_dim: int, scope: str) -> nn.Module | None:
    mode = FusionMode(mode)
    if mode in (FusionMode.RES_CA, FusionMode.CA):
        return CrossAttentionFusion(
            d_model, num_heads, head_dim, scope=scope, residual=mode is FusionMode.RES_CA
        )
    if mode is FusionMode.CONCAT:
        return nn.Linear(2 * d_model, d_model)
    if mode is FusionMode.MLP:
        return nn.Sequential(nn.Linear(2 * d_model, d_model), nn.ReLU(), nn.Linear(d_model, d_model))
    return None


# Time conditioning and head


def sinusoidal_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """(B,) timesteps -> (B, dim) sin/cos features."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float64, device=t.device) / max(half, 1)
    )
    args = t.to(torch.float64)[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1)
    if dim % 2:
        emb = torch.cat([emb, emb.new_zeros((emb.shape[0], 1))], dim=-1)
    return emb


class TimeEmbedding(nn.Module):
    def __init__(self, d_model: int) -> None:
        super().__init__()
        self.d_model = d_model
        self.mlp = nn.Sequential(nn.Linear(d_model, d_model), nn.GELU(), nn.Linear(d_model, d_model))

    def forward(self, t: int, like: torch.Tensor) -> torch.Tensor:
        emb = sinusoidal_embedding(torch.tensor([t], device=like.device), self.d_model)
        return self.mlp(emb.to(like.dtype))[0]


class DetectionHead(nn.Module):
    """Box deltas added to the proposals plus C + 1 sigmoid class logits."""

    def __init__(self, d_model: int, num_classes: int, dropout: float = 0.3) -> None:
        super().__init__()
        self.dropout = nn.Dropout(dropout)
        self.reg = nn.Sequential(nn.Linear(d_model, d_model), nn.ReLU(), nn.Linear(d_model, 7))
        self.cls = nn.Linear(d_model, num_classes + 1)
        nn.init.zeros_(self.reg[-1].weight)
        nn.init.zeros_(self.reg[-1].bias)
        nn.init.constant_(self.cls.bias, -math.log((1 - PRIOR_PROB) / PRIOR_PROB))

    def forward(
        self, fused: torch.Tensor, proposals: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (x0 prediction in signal space, class logits)."""
        x = self.dropout(fused)
        return proposals + self.reg(x), self.cls(x)
