"""Cost matrix and prediction-to-ground-truth assignment values."""

from dataclasses import dataclass, field

import torch

COST_COMPONENTS = ("cls", "l1", "giou", "center")


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """N x M matching cost with its weighted components kept for diagnostics."""

    values: torch.Tensor
    components: dict[str, torch.Tensor] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError(f"Cost matrix must be 2-D, got shape {tuple(self.values.shape)}")
        if not bool(torch.isfinite(self.values).all()):
            raise ValueError("Cost matrix entries must be finite")
        for name, part in self.components.items():
            if part.shape != self.values.shape:
                raise ValueError(f"Component {name} has shape {tuple(part.shape)}")

    @classmethod
    def from_values(cls, values) -> "CostMatrix":
        """Wrap a plain nested list or array (no component breakdown)."""
        return cls(values=torch.as_tensor(values, dtype=torch.float64))

    @property
    def num_predictions(self) -> int:
        return int(self.values.shape[0])

    @property
    def num_gt(self) -> int:
        return int(self.values.shape[1])

    def scaled(self, factor: float) -> "CostMatrix":
        return CostMatrix(
            values=self.values * factor,
            components={k: v * factor for k, v in self.components.items()},
        )


@dataclass(frozen=True, slots=True)
class Assignment:
    """Matched (prediction, gt) pairs sorted by prediction index.

    Invariants:
    - each prediction appears in at most one pair
    - unmatched holds every prediction index not in a pair, ascending
    """

    pairs: tuple[tuple[int, int], ...]
    unmatched: tuple[int, ...]

    def __post_init__(self) -> None:
        preds = [p for p, _ in self.pairs]
        if len(set(preds)) != len(preds):
            raise ValueError("A prediction may appear in at most one pair")
        if set(preds) & set(self.unmatched):
            raise ValueError("Unmatched predictions must not appear in pairs")

    @classmethod
    def from_pairs(cls, pairs, num_predictions: int) -> "Assignment":
        ordered = tuple(sorted((int(p), int(g)) for p, g in pairs))
        matched = {p for p, _ in ordered}
        unmatched = tuple(i for i in range(num_predictions) if i not in matched)
        return cls(pairs=ordered, unmatched=unmatched)

    @property
    def num_matched(self) -> int:
        return len(self.pairs)

    def pred_indices(self) -> torch.Tensor:
        return torch.tensor([p for p, _ in self.pairs], dtype=torch.long)

    def gt_indices(self) -> torch.Tensor:
        return torch.tensor([g for _, g in self.pairs], dtype=torch.long)

    def gts_covered(self) -> set[int]:
        return {g for _, g in self.pairs}

    def total_cost(self, cost: CostMatrix) -> float:
        return float(sum(float(cost.values[p, g]) for p, g in self.pairs))
