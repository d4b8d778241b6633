"""Domain value objects - immutable data structures."""

from .assignment import COST_COMPONENTS, Assignment, CostMatrix
from .box3d import BOX_DIM, MIN_BOX_SIZE, POLYGON_AREA_TOLERANCE, BevPolygon, Box3D, wrap_angle
from .box_normalizer import DEFAULT_SIGNAL_SCALE, BoxNormalizer
from .detection import DetectionOutput, GroundTruth
from .difficulty import DIFFICULTY_LIMITS, Difficulty, DifficultyLimits, admits
from .diffusion_schedule import CLEAN_TIMESTEP, DiffusionSchedule, ScheduleKind
from .loss_weights import LossBreakdown, LossWeights
from .noisy_boxes import NoisyBoxSet
from .pr_curve import PRCurve
from .scene import ObjectAux, Scene, VoxelGrid, grid_dims

__all__ = [
    "Box3D",
    "BevPolygon",
    "BOX_DIM",
    "MIN_BOX_SIZE",
    "POLYGON_AREA_TOLERANCE",
    "wrap_angle",
    "BoxNormalizer",
    "DEFAULT_SIGNAL_SCALE",
    "DiffusionSchedule",
    "ScheduleKind",
    "CLEAN_TIMESTEP",
    "LossWeights",
    "LossBreakdown",
    "NoisyBoxSet",
    "DetectionOutput",
    "GroundTruth",
    "CostMatrix",
    "Assignment",
    "COST_COMPONENTS",
    "PRCurve",
    "Scene",
    "ObjectAux",
    "VoxelGrid",
    "grid_dims",
    "Difficulty",
    "DifficultyLimits",
    "DIFFICULTY_LIMITS",
    "admits",
]
