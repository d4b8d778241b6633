"""Diffusion variance schedule value object."""

from dataclasses import dataclass
from enum import StrEnum

import torch

# Timestep index meaning "fully denoised" (alpha_bar = 1)
CLEAN_TIMESTEP = -1


class ScheduleKind(StrEnum):
    COSINE = "cosine"
    LINEAR = "linear"


@dataclass(frozen=True, eq=False)
class DiffusionSchedule:
    """Immutable variance schedule over T steps.

    Invariants:
    - 0 < beta[t] < 1
    - alpha_bar strictly decreasing

    `variance_as_noise_coef` switches the noise coefficient of the closed-form
    corruption from sqrt(1 - alpha_bar) to (1 - alpha_bar).
    """

    kind: ScheduleKind
    betas: torch.Tensor
    alpha_bar: torch.Tensor
    variance_as_noise_coef: bool = False

    def __post_init__(self) -> None:
        if self.betas.ndim != 1 or self.betas.shape != self.alpha_bar.shape:
            raise ValueError("betas and alpha_bar must be 1-D tensors of equal length")
        if self.betas.numel() < 1:
            raise ValueError("Schedule must have at least one step")
        if not bool(torch.isfinite(self.betas).all()):
            raise ValueError("betas must be finite")
        if not bool(((self.betas > 0) & (self.betas < 1)).all()):
            raise ValueError("betas must lie in (0, 1)")
        if self.alpha_bar.numel() > 1 and not bool((self.alpha_bar[1:] < self.alpha_bar[:-1]).all()):
            raise ValueError("alpha_bar must be strictly decreasing")

    @property
    def num_steps(self) -> int:
        return int(self.betas.numel())

    def alpha_bar_at(self, t: int) -> float:
        """alpha_bar[t]; the clean timestep (-1) maps to 1."""
        if t == CLEAN_TIMESTEP:
            return 1.0
        if not 0 <= t < self.num_steps:
            raise ValueError(f"Timestep must be in [0, {self.num_steps}), got {t}")
        return float(self.alpha_bar[t])

    def signal_coef(self, t: int) -> float:
        return self.alpha_bar_at(t) ** 0.5

    def noise_coef(self, t: int) -> float:
        remaining = 1.0 - self.alpha_bar_at(t)
        if self.variance_as_noise_coef:
            return remaining
        return remaining**0.5
