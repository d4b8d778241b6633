"""Application services - use case implementations."""

from .ablation_service import AblationCell, AblationService, ablation_grid, summarize
from .dataset_service import DatasetService, DatasetSummary
from .evaluation_service import EvaluationService, ground_truth
from .inference_service import InferenceReport, InferenceService, PerfCounterClock, scene_tensors
from .selftest_service import SelftestService, SuiteResult
from .training_service import TrainingReport, TrainingService

__all__ = [
    "AblationCell",
    "AblationService",
    "ablation_grid",
    "summarize",
    "DatasetService",
    "DatasetSummary",
    "EvaluationService",
    "ground_truth",
    "InferenceReport",
    "InferenceService",
    "PerfCounterClock",
    "scene_tensors",
    "SelftestService",
    "SuiteResult",
    "TrainingReport",
    "TrainingService",
]
