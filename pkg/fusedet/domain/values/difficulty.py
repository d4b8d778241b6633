"""KITTI difficulty strata."""

from dataclasses import dataclass
from enum import StrEnum

from .scene import ObjectAux


class Difficulty(StrEnum):
    EASY = "easy"
    MODERATE = "moderate"
    HARD = "hard"


@dataclass(frozen=True, slots=True)
class DifficultyLimits:
    min_bbox_height: float  # pixels
    max_occlusion: int
    max_truncation: float


DIFFICULTY_LIMITS: dict[Difficulty, DifficultyLimits] = {
    Difficulty.EASY: DifficultyLimits(min_bbox_height=40.0, max_occlusion=0, max_truncation=0.15),
    Difficulty.MODERATE: DifficultyLimits(
        min_bbox_height=25.0, max_occlusion=1, max_truncation=0.30
    ),
    Difficulty.HARD: DifficultyLimits(min_bbox_height=25.0, max_occlusion=2, max_truncation=0.50),
}


def admits(difficulty: Difficulty, aux: ObjectAux) -> bool:
    """Whether an annotated object counts at the given stratum."""
    limits = DIFFICULTY_LIMITS[difficulty]
    return (
        aux.bbox_height >= limits.min_bbox_height
        and 0 <= aux.occluded <= limits.max_occlusion
        and aux.truncated <= limits.max_truncation
    )
