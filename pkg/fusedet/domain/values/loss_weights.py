"""Loss weighting and loss breakdown value objects."""

from collections.abc import Sequence
from dataclasses import dataclass

import torch

# Default business rules
DEFAULT_L1_WEIGHT = 2.5
DEFAULT_GAMMA = 2.0


@dataclass(frozen=True, slots=True)
class LossWeights:
    """Weights of the set-prediction objective.

    total = cls_weight * cls + reg_weight * (l1_weight * l1 + giou_weight * giou
            + center_weight * center)
    """

    cls_weight: float = 1.0
    reg_weight: float = 1.0
    l1_weight: float = DEFAULT_L1_WEIGHT
    giou_weight: float = 1.0
    center_weight: float = 1.0
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self) -> None:
        weights = (
            self.cls_weight,
            self.reg_weight,
            self.l1_weight,
            self.giou_weight,
            self.center_weight,
        )
        if any(w < 0 for w in weights):
            raise ValueError(f"Loss weights must be non-negative, got {weights}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True, eq=False)
class LossBreakdown:
    """Loss components as 0-d tensors; `total` carries the autograd graph."""

    cls: torch.Tensor
    l1: torch.Tensor
    giou: torch.Tensor
    center: torch.Tensor
    total: torch.Tensor
    num_matched: int

    @classmethod
    def compose(
        cls,
        cls_loss: torch.Tensor,
        l1: torch.Tensor,
        giou: torch.Tensor,
        center: torch.Tensor,
        weights: LossWeights,
        num_matched: int,
    ) -> "LossBreakdown":
        regression = (
            weights.l1_weight * l1 + weights.giou_weight * giou + weights.center_weight * center
        )
        total = weights.cls_weight * cls_loss + weights.reg_weight * regression
        return cls(
            cls=cls_loss, l1=l1, giou=giou, center=center, total=total, num_matched=num_matched
        )

    @classmethod
    def mean(cls, parts: Sequence["LossBreakdown"]) -> "LossBreakdown":
        """Average detached components over several scenes."""
        if not parts:
            raise ValueError("Cannot average an empty list of losses")
        count = len(parts)

        def avg(name: str) -> torch.Tensor:
            return sum(getattr(p, name).detach() for p in parts) / count

        return cls(
            cls=avg("cls"),
            l1=avg("l1"),
            giou=avg("giou"),
            center=avg("center"),
            total=avg("total"),
            num_matched=sum(p.num_matched for p in parts),
        )

    def to_record(self) -> dict[str, float]:
        """Plain floats for logging and CSV rows."""
        return {
            "cls": float(self.cls),
            "l1": float(self.l1),
            "giou": float(self.giou),
            "center": float(self.center),
            "total": float(self.total),
        }
