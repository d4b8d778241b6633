"""Selftest service - oracle suites run against the installed build."""

import itertools
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch.func import functional_call

from fusedet.config import SelftestConfig
from fusedet.domain import Box3D, BoxNormalizer, CostMatrix, GroundTruth, LossWeights
from fusedet.domain.services import (
    Clock,
    assign,
    build_cost_matrix,
    corrupt,
    ddim_step,
    ddim_timesteps,
    focal_loss,
    hungarian_match,
    iou_3d,
    make_schedule,
    normalize_boxes,
    points_in_boxes,
    set_prediction_loss,
)
from fusedet.infrastructure.synthetic import GeneratorSettings, generate_scene
from fusedet.infrastructure.voxelizer import Voxelizer
from fusedet.model import CrossAttentionFusion, DetectionHead, DetectorSettings, FusionDetector

from .inference_service import PerfCounterClock, scene_tensors

logger = logging.getLogger(__name__)

ROTATED_SQUARE_IOU = 1.0 / math.sqrt(2.0)
ROTATED_SQUARE_TOLERANCE = 1e-3
GRADCHECK_RTOL = 1e-3
GRADCHECK_ATOL = 1e-6
MOMENT_SIGMAS = 3.0
DDIM_RECOVERY_TOLERANCE = 1e-5
FOCAL_TOLERANCE = 1e-9

# Small grid used by the gradient checks
TINY_CLASSES = ("Car", "Pedestrian")
TINY_RANGE = (0.0, -6.4, -2.0, 12.8, 6.4, 1.2)
TINY_VOXEL = (0.4, 0.4, 0.4)
TINY_MAX_SIZE = (6.0, 3.0, 3.0)


@dataclass(frozen=True, slots=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


# Oracles


def monte_carlo_iou(a: Box3D, b: Box3D, samples: int, rng: np.random.Generator) -> float:
    """IoU estimated by uniform sampling of the joint axis-aligned bounding volume."""
    boxes = np.array([a.as_tuple(), b.as_tuple()])
    reach = np.hypot(boxes[:, 3], boxes[:, 4]) / 2.0
    lo = np.min(np.column_stack([boxes[:, :2] - reach[:, None], boxes[:, 2] - boxes[:, 5] / 2]), axis=0)
    hi = np.max(np.column_stack([boxes[:, :2] + reach[:, None], boxes[:, 2] + boxes[:, 5] / 2]), axis=0)
    both = either = 0
    chunk = 200_000
    for start in range(0, samples, chunk):
        n = min(chunk, samples - start)
        points = rng.uniform(lo, hi, size=(n, 3))
        inside = points_in_boxes(points, boxes)
        both += int(np.count_nonzero(inside.all(axis=1)))
        either += int(np.count_nonzero(inside.any(axis=1)))
    return both / either if either else 0.0


def random_box_pair(rng: np.random.Generator) -> tuple[Box3D, Box3D]:
    """Two boxes that usually overlap."""
    size = rng.uniform(0.5, 4.0, size=3)
    a = Box3D(*rng.uniform(-5, 5, size=3), *size, rng.uniform(-math.pi, math.pi))
    shift = rng.uniform(-0.6, 0.6, size=3) * size
    b = Box3D(
        a.cx + shift[0],
        a.cy + shift[1],
        a.cz + shift[2],
        *(size * rng.uniform(0.6, 1.4, size=3)),
        rng.uniform(-math.pi, math.pi),
    )
    return a, b


def brute_force_min_cost(values: np.ndarray) -> float:
    """Minimum total cost over every one-to-one matching of min(N, M) pairs."""
    n, m = values.shape
    if n >= m:
        perms = np.array(list(itertools.permutations(range(n), m)), dtype=np.int64)
        return float(values[perms, np.arange(m)].sum(axis=1).min())
    perms = np.array(list(itertools.permutations(range(m), n)), dtype=np.int64)
    return float(values[np.arange(n), perms].sum(axis=1).min())


def tiny_detector(
    num_classes: int = 2, d_model: int = 16, dtype: torch.dtype = torch.float64
) -> tuple[FusionDetector, BoxNormalizer, Voxelizer]:
    """Few-channel detector on a 32 x 32 x 8 grid."""
    voxelizer = Voxelizer(TINY_VOXEL, TINY_RANGE)
    normalizer = BoxNormalizer.from_point_cloud_range(TINY_RANGE, TINY_MAX_SIZE)
    settings = DetectorSettings(
        num_classes=num_classes,
        grid_size=voxelizer.grid_size,
        image_channels=4,
        image_strides=(2, 1),
        voxel_channels=4,
        point_channels=6,
        bev_stride=2,
        d_model=d_model,
        num_heads=2,
        head_dim=8,
        roi_grid=3,
        dropout=0.0,
    )
    model = FusionDetector(settings, normalizer).to(dtype)
    return model, normalizer, voxelizer


def tiny_generator_settings() -> GeneratorSettings:
    return GeneratorSettings(
        class_names=TINY_CLASSES,
        point_cloud_range=TINY_RANGE,
        image_height=16,
        image_width=32,
        focal_length=16.0,
        min_objects=1,
        max_objects=2,
        points_per_object=30,
        clutter_points=60,
    )


# Suites


def check_iou_oracle(cfg: SelftestConfig) -> SuiteResult:
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(cfg.iou_pairs):
        a, b = random_box_pair(rng)
        worst = max(worst, abs(iou_3d(a, b) - monte_carlo_iou(a, b, cfg.mc_samples, rng)))
    square = Box3D(0, 0, 0, 2, 2, 2, 0)
    rotated = Box3D(0, 0, 0, 2, 2, 2, math.pi / 4)
    rotation_error = abs(iou_3d(square, rotated) - ROTATED_SQUARE_IOU)
    passed = worst < cfg.iou_tolerance and rotation_error < ROTATED_SQUARE_TOLERANCE
    return SuiteResult(
        "iou-monte-carlo",
        passed,
        f"max |iou - mc|={worst:.4f} over {cfg.iou_pairs} pairs, 45deg error={rotation_error:.2e}",
    )


def check_hungarian_oracle(cfg: SelftestConfig) -> SuiteResult:
    rng = np.random.default_rng(cfg.seed)
    mismatches = 0
    for _ in range(cfg.hungarian_trials):
        n, m = (int(v) for v in rng.integers(1, cfg.max_assignment_size + 1, size=2))
        values = rng.uniform(0.0, 10.0, size=(n, m))
        cost = CostMatrix.from_values(values)
        found = hungarian_match(cost).total_cost(cost)
        if abs(found - brute_force_min_cost(values)) > 1e-9:
            mismatches += 1
    return SuiteResult(
        "hungarian-brute-force",
        mismatches == 0,
        f"{mismatches} mismatches over {cfg.hungarian_trials} matrices",
    )


def check_diffusion_statistics(cfg: SelftestConfig, draws: int = 100_000) -> SuiteResult:
    schedule = make_schedule("cosine", 1000)
    generator = torch.Generator().manual_seed(cfg.seed)
    u0 = torch.full((draws, 1), 0.7, dtype=torch.float64)
    failures = []
    for t in (10, 500, 990):
        noise = torch.randn((draws, 1), generator=generator, dtype=torch.float64)
        sample = corrupt(u0, t, noise, schedule)
        mean, var = float(sample.mean()), float(sample.var())
        expected_mean = schedule.signal_coef(t) * 0.7
        expected_var = 1.0 - schedule.alpha_bar_at(t)
        mean_bound = MOMENT_SIGMAS * math.sqrt(expected_var / draws)
        var_bound = MOMENT_SIGMAS * expected_var * math.sqrt(2.0 / (draws - 1))
        if abs(mean - expected_mean) > mean_bound or abs(var - expected_var) > var_bound:
            failures.append(t)

    worst = 0.0
    target = torch.randn((12, 7), generator=generator, dtype=torch.float64)
    for d_steps in (1, 2, 4, 8, 50):
        u = torch.randn((12, 7), generator=generator, dtype=torch.float64)
        for t, t_prev in ddim_timesteps(schedule.num_steps, d_steps):
            u = ddim_step(u, target, t, t_prev, schedule)
        worst = max(worst, float((u - target).abs().max()))
    passed = not failures and worst < DDIM_RECOVERY_TOLERANCE
    return SuiteResult(
        "diffusion-statistics",
        passed,
        f"moment failures at t={failures or '-'}, oracle DDIM max error={worst:.2e}",
    )


def check_focal_identity(cfg: SelftestConfig) -> SuiteResult:
    generator = torch.Generator().manual_seed(cfg.seed)
    worst = 0.0
    for _ in range(1000):
        probs = torch.rand((3, 4), generator=generator, dtype=torch.float64) * 0.98 + 0.01
        targets = (torch.rand((3, 4), generator=generator, dtype=torch.float64) > 0.5).to(torch.float64)
        bce = F.binary_cross_entropy(probs, targets, reduction="sum") / probs.shape[0]
        worst = max(worst, abs(float(focal_loss(probs, targets, 0.0) - bce)))
    worked = float(focal_loss(torch.tensor([[0.9]], dtype=torch.float64), torch.ones(1, 1, dtype=torch.float64), 2.0))
    expected = -(0.1**2) * math.log(0.9)
    passed = worst < FOCAL_TOLERANCE and abs(worked - expected) < FOCAL_TOLERANCE
    return SuiteResult("focal-identity", passed, f"max |focal - bce|={worst:.1e}, worked={worked:.6e}")


def _gradcheck(fn: Callable[..., torch.Tensor], *inputs: torch.Tensor) -> bool:
    return bool(
        torch.autograd.gradcheck(
            fn, inputs, eps=1e-6, atol=GRADCHECK_ATOL, rtol=GRADCHECK_RTOL, raise_exception=False
        )
    )


def check_gradients(cfg: SelftestConfig, num_proposals: int = 4) -> SuiteResult:
    """Analytic vs central-difference gradients in float64 on a tiny configuration."""
    torch.manual_seed(cfg.seed)
    generator = torch.Generator().manual_seed(cfg.seed)
    dtype = torch.float64
    results: dict[str, bool] = {}

    head = DetectionHead(16, 2, dropout=0.0).to(dtype)
    torch.nn.init.normal_(head.reg[-1].weight, std=0.1)
    fused = torch.randn((num_proposals, 16), dtype=dtype, requires_grad=True)
    proposals = torch.randn((num_proposals, 7), dtype=dtype, requires_grad=True)
    results["head"] = _gradcheck(lambda x, p: torch.cat(head(x, p), dim=1), fused, proposals)

    fusion = CrossAttentionFusion(16, 2, 8).to(dtype)
    img = torch.randn((num_proposals, 16), dtype=dtype, requires_grad=True)
    pt = torch.randn((num_proposals, 16), dtype=dtype, requires_grad=True)
    results["fusion"] = _gradcheck(fusion, img, pt)

    model, normalizer, voxelizer = tiny_detector(dtype=dtype)
    torch.nn.init.normal_(model.head.reg[-1].weight, std=0.1)
    scene = generate_scene(tiny_generator_settings(), np.random.default_rng(cfg.seed))
    tensors = scene_tensors(scene, voxelizer, dtype)
    gt_boxes = scene.boxes_tensor(dtype)
    gts = GroundTruth(
        boxes=gt_boxes,
        labels=scene.labels_tensor(),
        signal_boxes=normalize_boxes(gt_boxes, normalizer),
    )
    signal = 0.5 * torch.randn((num_proposals, 7), generator=generator, dtype=dtype)
    weights = LossWeights()
    t = 500
    model.eval()
    with torch.no_grad():
        preds = model(tensors, signal, t).detections(normalizer)
        assignment = assign(
            build_cost_matrix(preds, gts, weights, normalizer.range_diagonal), "hungarian"
        )

    def total_loss(name: str) -> Callable[[torch.Tensor], torch.Tensor]:
        def fn(value: torch.Tensor) -> torch.Tensor:
            out = functional_call(model, {name: value}, (tensors, signal, t))
            loss = set_prediction_loss(
                out.detections(normalizer), gts, assignment, weights, normalizer.range_diagonal
            )
            return loss.total

        return fn

    params = dict(model.named_parameters())
    for name in (
        "head.cls.weight",
        "head.reg.2.weight",
        "fusion.w_out.weight",
        "pt_roi.weight",
        "img_roi.weight",
        "point_encoder.conv.weight",
        "image_encoder.net.2.weight",
    ):
        value = params[name].detach().clone().requires_grad_(True)
        results[name] = _gradcheck(total_loss(name), value)

    failed = [k for k, ok in results.items() if not ok]
    return SuiteResult(
        "gradient-checks",
        not failed,
        f"{len(results) - len(failed)}/{len(results)} checks passed"
        + (f"; failed: {', '.join(failed)}" if failed else ""),
    )


class SelftestService:
    """Runs every oracle suite and reports pass/fail per suite."""

    def __init__(self, settings: SelftestConfig | None = None, clock: Clock | None = None) -> None:
        self._settings = settings or SelftestConfig()
        self._clock = clock or PerfCounterClock()

    def suites(self) -> list[tuple[str, Callable[[SelftestConfig], SuiteResult]]]:
        suites: list[tuple[str, Callable[[SelftestConfig], SuiteResult]]] = [
            ("iou-monte-carlo", check_iou_oracle),
            ("hungarian-brute-force", check_hungarian_oracle),
            ("diffusion-statistics", check_diffusion_statistics),
            ("focal-identity", check_focal_identity),
        ]
        if self._settings.gradcheck:
            suites.append(("gradient-checks", check_gradients))
        return suites

    def run(self, on_result: Callable[[SuiteResult], None] | None = None) -> list[SuiteResult]:
        results = []
        for name, suite in self.suites():
            start = self._clock.now()
            try:
                result = suite(self._settings)
            except Exception as e:
                logger.exception("Selftest suite crashed suite=%s", name)
                result = SuiteResult(name, False, f"crashed: {e}")
            result = SuiteResult(result.name, result.passed, result.detail, self._clock.now() - start)
            logger.info("Selftest suite=%s passed=%s %s", name, result.passed, result.detail)
            results.append(result)
            if on_result is not None:
                on_result(result)
        return results
