"""Precision/recall curve value object."""

from dataclasses import dataclass

INTERPOLATION_POINTS = (11, 40)


@dataclass(frozen=True, slots=True)
class PRCurve:
    """Score-ordered precision/recall points and interpolated AP."""

    recall: tuple[float, ...]
    precision: tuple[float, ...]
    ap: float
    num_gt: int
    interp_points: int = 40

    def __post_init__(self) -> None:
        if len(self.recall) != len(self.precision):
            raise ValueError("recall and precision must have equal length")
        if any(b < a for a, b in zip(self.recall, self.recall[1:], strict=False)):
            raise ValueError("recall must be non-decreasing")
        if not 0.0 <= self.ap <= 1.0:
            raise ValueError(f"AP must lie in [0, 1], got {self.ap}")
        if self.interp_points not in INTERPOLATION_POINTS:
            raise ValueError(f"interp_points must be one of {INTERPOLATION_POINTS}")

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.recall, self.precision, strict=True))
