"""Detection and ground-truth tensors exchanged between model, matcher and evaluator."""

from dataclasses import dataclass

import torch

from .box3d import BOX_DIM, Box3D
from .scene import ObjectAux


def _check_boxes(name: str, boxes: torch.Tensor) -> None:
    if boxes.ndim != 2 or boxes.shape[1] != BOX_DIM:
        raise ValueError(f"{name} must be N x {BOX_DIM}, got {tuple(boxes.shape)}")


@dataclass(frozen=True, eq=False)
class DetectionOutput:
    """Per-proposal head output.

    `boxes` are metric (N x 7); `signal_boxes` are the same boxes in the
    normalized diffusion space when available. `class_probs` holds C + 1
    independent sigmoid probabilities, the last column being "no object".
    """

    boxes: torch.Tensor
    class_probs: torch.Tensor
    signal_boxes: torch.Tensor | None = None

    def __post_init__(self) -> None:
        _check_boxes("boxes", self.boxes)
        if self.class_probs.ndim != 2 or self.class_probs.shape[0] != self.boxes.shape[0]:
            raise ValueError(
                f"class_probs must be N x (C+1) with N={self.boxes.shape[0]}, "
                f"got {tuple(self.class_probs.shape)}"
            )
        if self.class_probs.shape[1] < 2:
            raise ValueError("class_probs needs at least one class plus 'no object'")
        if self.signal_boxes is not None and self.signal_boxes.shape != self.boxes.shape:
            raise ValueError("signal_boxes must match boxes in shape")

    def __len__(self) -> int:
        return int(self.boxes.shape[0])

    @property
    def num_classes(self) -> int:
        return int(self.class_probs.shape[1]) - 1

    @property
    def scores(self) -> torch.Tensor:
        """Max foreground probability per proposal."""
        return self.class_probs[:, : self.num_classes].max(dim=1).values

    @property
    def labels(self) -> torch.Tensor:
        return self.class_probs[:, : self.num_classes].argmax(dim=1)

    def select(self, index: torch.Tensor) -> "DetectionOutput":
        """Subset by boolean mask or integer index."""
        return DetectionOutput(
            boxes=self.boxes[index],
            class_probs=self.class_probs[index],
            signal_boxes=None if self.signal_boxes is None else self.signal_boxes[index],
        )

    def detach(self) -> "DetectionOutput":
        return DetectionOutput(
            boxes=self.boxes.detach(),
            class_probs=self.class_probs.detach(),
            signal_boxes=None if self.signal_boxes is None else self.signal_boxes.detach(),
        )

    def to_boxes(self) -> list[Box3D]:
        return [Box3D.from_sequence(row) for row in self.boxes.detach().cpu().tolist()]


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Ground-truth boxes of one scene (metric, optionally also signal space)."""

    boxes: torch.Tensor
    labels: torch.Tensor
    signal_boxes: torch.Tensor | None = None
    aux: tuple[ObjectAux, ...] | None = None

    def __post_init__(self) -> None:
        _check_boxes("boxes", self.boxes)
        if self.labels.ndim != 1 or self.labels.shape[0] != self.boxes.shape[0]:
            raise ValueError("labels must have one entry per box")
        if self.signal_boxes is not None and self.signal_boxes.shape != self.boxes.shape:
            raise ValueError("signal_boxes must match boxes in shape")
        if self.aux is not None and len(self.aux) != self.boxes.shape[0]:
            raise ValueError("aux must have one entry per box")

    def __len__(self) -> int:
        return int(self.boxes.shape[0])

    @classmethod
    def empty(cls, dtype: torch.dtype = torch.float64) -> "GroundTruth":
        return cls(
            boxes=torch.zeros((0, BOX_DIM), dtype=dtype),
            labels=torch.zeros((0,), dtype=torch.long),
            signal_boxes=torch.zeros((0, BOX_DIM), dtype=dtype),
        )
