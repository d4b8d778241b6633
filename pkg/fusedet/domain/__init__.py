"""Pure domain layer - no file or process I/O."""

from .errors import (
    ConfigError,
    KittiParseError,
    OutOfRangeError,
    SceneGenerationError,
    TrainingDivergedError,
)
from .ports import SceneRepository
from .services import Clock
from .values import (
    Assignment,
    BevPolygon,
    Box3D,
    BoxNormalizer,
    CostMatrix,
    DetectionOutput,
    DiffusionSchedule,
    Difficulty,
    GroundTruth,
    LossBreakdown,
    LossWeights,
    NoisyBoxSet,
    ObjectAux,
    PRCurve,
    Scene,
    ScheduleKind,
    VoxelGrid,
)

__all__ = [
    # Values
    "Box3D",
    "BevPolygon",
    "BoxNormalizer",
    "DiffusionSchedule",
    "ScheduleKind",
    "LossWeights",
    "LossBreakdown",
    "NoisyBoxSet",
    "DetectionOutput",
    "GroundTruth",
    "CostMatrix",
    "Assignment",
    "PRCurve",
    "Scene",
    "ObjectAux",
    "VoxelGrid",
    "Difficulty",
    # Errors
    "OutOfRangeError",
    "KittiParseError",
    "TrainingDivergedError",
    "SceneGenerationError",
    "ConfigError",
    # Services
    "Clock",
    # Ports
    "SceneRepository",
]
