"""Forward box corruption, box normalization, padding and the DDIM reverse step."""

import logging
import math

import torch

from ..errors import OutOfRangeError
from ..values.box3d import BOX_DIM, Box3D, wrap_angle
from ..values.box_normalizer import BoxNormalizer
from ..values.diffusion_schedule import CLEAN_TIMESTEP, DiffusionSchedule, ScheduleKind

logger = logging.getLogger(__name__)

LINEAR_BETA_START = 1e-4
LINEAR_BETA_END = 0.02
COSINE_OFFSET = 0.008
MAX_BETA = 0.999
CLAMP_FACTOR = 3.0  # corrupted signals are clamped to +-3 * signal_scale
MIN_DECODED_SIZE = 1e-3  # meters


def make_schedule(
    kind: ScheduleKind | str = ScheduleKind.COSINE,
    num_steps: int = 1000,
    variance_as_noise_coef: bool = False,
) -> DiffusionSchedule:
    """Build a linear or cosine variance schedule over `num_steps` steps."""
    if num_steps < 1:
        raise ValueError(f"Schedule needs at least one step, got {num_steps}")
    kind = ScheduleKind(kind)
    if kind is ScheduleKind.LINEAR:
        betas = torch.linspace(LINEAR_BETA_START, LINEAR_BETA_END, num_steps, dtype=torch.float64)
    else:
        x = torch.linspace(0, num_steps, num_steps + 1, dtype=torch.float64)
        f = torch.cos(((x / num_steps) + COSINE_OFFSET) / (1 + COSINE_OFFSET) * math.pi * 0.5) ** 2
        f = f / f[0]
        betas = torch.clip(1 - (f[1:] / f[:-1]), 0, MAX_BETA)
    alpha_bar = torch.cumprod(1.0 - betas, dim=0)
    return DiffusionSchedule(
        kind=kind, betas=betas, alpha_bar=alpha_bar, variance_as_noise_coef=variance_as_noise_coef
    )


# Normalization


def _bounds(n: BoxNormalizer, like: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    lo = like.new_tensor(n.center_min)
    hi = like.new_tensor(n.center_max)
    size = like.new_tensor(n.max_size)
    return lo, hi, size


def normalize_boxes(boxes: torch.Tensor, n: BoxNormalizer, check_range: bool = True) -> torch.Tensor:
    """Metric (..., 7) boxes -> signal space (..., 7)."""
    lo, hi, max_size = _bounds(n, boxes)
    s = n.signal_scale
    centers = boxes[..., :3]
    if check_range and boxes.numel():
        outside = (centers < lo) | (centers > hi)
        if bool(outside.any()):
            bad = centers[outside.any(dim=-1)][0].tolist()
            raise OutOfRangeError(
                f"Box center {bad} outside range {n.center_min} - {n.center_max}"
            )
    u_center = (centers - lo) / (hi - lo) * (2 * s) - s
    u_size = boxes[..., 3:6] / max_size * (2 * s) - s
    u_yaw = boxes[..., 6:7] / math.pi * s
    return torch.cat([u_center, u_size, u_yaw], dim=-1)


def denormalize_boxes(signal: torch.Tensor, n: BoxNormalizer) -> torch.Tensor:
    """Signal space (..., 7) -> metric boxes; sizes floored, yaw re-wrapped."""
    lo, hi, max_size = _bounds(n, signal)
    s = n.signal_scale
    centers = (signal[..., :3] + s) / (2 * s) * (hi - lo) + lo
    sizes = ((signal[..., 3:6] + s) / (2 * s) * max_size).clamp(min=MIN_DECODED_SIZE)
    yaw = torch.remainder(signal[..., 6:7] / s * math.pi + math.pi, 2 * math.pi) - math.pi
    return torch.cat([centers, sizes, yaw], dim=-1)


def clamp_signal(signal: torch.Tensor, n: BoxNormalizer) -> torch.Tensor:
    limit = CLAMP_FACTOR * n.signal_scale
    return signal.clamp(-limit, limit)


def normalize(box: Box3D, n: BoxNormalizer) -> torch.Tensor:
    """One metric box -> its 7-vector in signal space (float64)."""
    return normalize_boxes(torch.tensor([box.as_tuple()], dtype=torch.float64), n)[0]


def denormalize(signal: torch.Tensor, n: BoxNormalizer) -> Box3D:
    values = denormalize_boxes(signal.reshape(1, BOX_DIM).to(torch.float64), n)[0].tolist()
    values[6] = wrap_angle(values[6])
    return Box3D.from_sequence(values)


# Forward process


def corrupt(
    u0: torch.Tensor, t: int, noise: torch.Tensor, schedule: DiffusionSchedule
) -> torch.Tensor:
    """Closed-form forward corruption of signal-space boxes at step t."""
    if not 0 <= t < schedule.num_steps:
        raise ValueError(f"Timestep must be in [0, {schedule.num_steps}), got {t}")
    return schedule.signal_coef(t) * u0 + schedule.noise_coef(t) * noise


def implied_noise(
    u_t: torch.Tensor, x0_pred: torch.Tensor, t: int, schedule: DiffusionSchedule
) -> torch.Tensor:
    """Noise that would turn x0_pred into u_t at step t."""
    return (u_t - schedule.signal_coef(t) * x0_pred) / schedule.noise_coef(t)


def sample_timestep(schedule: DiffusionSchedule, generator: torch.Generator) -> int:
    return int(torch.randint(0, schedule.num_steps, (1,), generator=generator))


def pad_ground_truth(
    gt: torch.Tensor, num_proposals: int, generator: torch.Generator
) -> tuple[torch.Tensor, torch.Tensor]:
    """Pad M signal-space boxes to `num_proposals` rows with standard Gaussian draws.

    Returns the padded boxes and a mask marking the padded rows.
    """
    num_gt = gt.shape[0]
    if num_gt > num_proposals:
        raise ValueError(f"Scene has {num_gt} objects but only {num_proposals} proposals")
    extra = torch.randn(
        (num_proposals - num_gt, BOX_DIM), generator=generator, dtype=gt.dtype
    ).to(gt.device)
    boxes = torch.cat([gt, extra], dim=0)
    pad_mask = torch.arange(num_proposals, device=gt.device) >= num_gt
    return boxes, pad_mask


# Reverse process


def ddim_timesteps(num_steps: int, sampling_steps: int) -> list[tuple[int, int]]:
    """Evenly spaced (t, t_prev) pairs from T-1 down to the clean step (-1)."""
    if not 1 <= sampling_steps <= num_steps:
        raise ValueError(f"sampling_steps must be in [1, {num_steps}], got {sampling_steps}")
    times = torch.linspace(-1, num_steps - 1, steps=sampling_steps + 1, dtype=torch.float64)
    ordered = list(reversed(times.round().long().tolist()))
    return list(zip(ordered[:-1], ordered[1:], strict=True))


def ddim_step(
    u_t: torch.Tensor,
    x0_pred: torch.Tensor,
    t: int,
    t_prev: int,
    schedule: DiffusionSchedule,
) -> torch.Tensor:
    """Deterministic (eta = 0) DDIM update from step t to t_prev."""
    if not (CLEAN_TIMESTEP <= t_prev < t < schedule.num_steps):
        raise ValueError(f"Need -1 <= t_prev < t < {schedule.num_steps}, got t={t} t_prev={t_prev}")
    eps = implied_noise(u_t, x0_pred, t, schedule)
    return schedule.signal_coef(t_prev) * x0_pred + schedule.noise_coef(t_prev) * eps


def renew_boxes(
    signal: torch.Tensor, keep: torch.Tensor, generator: torch.Generator
) -> torch.Tensor:
    """Replace rows not in `keep` with fresh standard Gaussian boxes."""
    fresh = torch.randn(signal.shape, generator=generator, dtype=signal.dtype).to(signal.device)
    renewed = torch.where(keep[:, None], signal, fresh)
    logger.debug("Box renewal kept=%d renewed=%d", int(keep.sum()), int((~keep).sum()))
    return renewed
