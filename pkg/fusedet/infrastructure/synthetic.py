"""Synthetic LiDAR + camera scenes for desk-scale experiments.

World frame: x forward, y left, z up, sensor at the origin. The camera sits
at the origin looking along +x with a single pinhole projection.
"""

import logging
import math
from dataclasses import dataclass

import cv2
import numpy as np
import torch

from fusedet.domain.errors import SceneGenerationError
from fusedet.domain.services.geometry import bev_intersection_pairs, points_in_boxes
from fusedet.domain.values.box3d import Box3D
from fusedet.domain.values.scene import Scene

logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 100
SURFACE_SHRINK = 0.95
PLACEMENT_MARGIN = 0.3  # meters kept free around each footprint
MIN_POINTS_PER_OBJECT = 10

# Canonical (l, w, h) in meters
CANONICAL_SIZES: dict[str, tuple[float, float, float]] = {
    "Car": (3.9, 1.6, 1.56),
    "Pedestrian": (0.8, 0.6, 1.73),
    "Cyclist": (1.76, 0.6, 1.73),
}
FALLBACK_SIZE = (2.0, 1.0, 1.5)

PALETTE = (
    (0.9, 0.2, 0.2),
    (0.2, 0.85, 0.25),
    (0.2, 0.3, 0.95),
    (0.9, 0.8, 0.1),
    (0.8, 0.2, 0.9),
)

# Box faces as corner indices (bottom 0-3, top 4-7)
_FACES = (
    (0, 1, 2, 3),
    (4, 5, 6, 7),
    (0, 1, 5, 4),
    (1, 2, 6, 5),
    (2, 3, 7, 6),
    (3, 0, 4, 7),
)


@dataclass(frozen=True, slots=True)
class GeneratorSettings:
    """Knobs of the synthetic scene generator."""

    class_names: tuple[str, ...] = ("Car", "Pedestrian", "Cyclist")
    point_cloud_range: tuple[float, float, float, float, float, float] = (
        2.0, -30.08, -3.0, 46.8, 30.08, 1.0,
    )
    image_height: int = 96
    image_width: int = 320
    focal_length: float = 160.0
    min_objects: int = 1
    max_objects: int = 8
    points_per_object: int = 60
    clutter_points: int = 400
    ground_z: float = -1.6
    size_jitter: float = 0.05
    point_noise: float = 0.01
    image_noise: float = 0.1
    fov_fraction: float = 0.9  # objects kept within this share of the horizontal FOV

    def __post_init__(self) -> None:
        if not 0 <= self.min_objects <= self.max_objects:
            raise ValueError(
                f"Need 0 <= min_objects <= max_objects, got {self.min_objects}, {self.max_objects}"
            )
        if self.points_per_object < MIN_POINTS_PER_OBJECT:
            raise ValueError(f"points_per_object must be >= {MIN_POINTS_PER_OBJECT}")
        if self.clutter_points < 1:
            raise ValueError("clutter_points must be >= 1")
        if not self.class_names:
            raise ValueError("At least one class is required")


def camera_projection(focal_length: float, image_height: int, image_width: int) -> np.ndarray:
    """3x4 matrix K [R | 0] with camera axes x=-y_world, y=-z_world, z=x_world."""
    intrinsics = np.array(
        [
            [focal_length, 0.0, image_width / 2.0],
            [0.0, focal_length, image_height / 2.0],
            [0.0, 0.0, 1.0],
        ]
    )
    rotation = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
    return intrinsics @ np.hstack([rotation, np.zeros((3, 1))])


def project(points: np.ndarray, projection: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """World points (K, 3) -> pixel coords (K, 2) and depth (K,)."""
    homogeneous = np.hstack([points[:, :3], np.ones((points.shape[0], 1))])
    image = homogeneous @ projection.T
    depth = image[:, 2]
    safe = np.where(np.abs(depth) > 1e-9, depth, 1e-9)
    return image[:, :2] / safe[:, None], depth


def _corners(box: Box3D) -> np.ndarray:
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    signs = np.array([(1, 1), (-1, 1), (-1, -1), (1, -1)], dtype=np.float64)
    local = signs * np.array([box.l / 2, box.w / 2])
    xy = local @ np.array([[c, s], [-s, c]]) + np.array([box.cx, box.cy])
    bottom = np.hstack([xy, np.full((4, 1), box.cz - box.h / 2)])
    top = np.hstack([xy, np.full((4, 1), box.cz + box.h / 2)])
    return np.vstack([bottom, top])


def render_image(
    boxes: tuple[Box3D, ...],
    labels: tuple[int, ...],
    projection: np.ndarray,
    settings: GeneratorSettings,
    rng: np.random.Generator,
) -> np.ndarray:
    """Flat-shaded class-colored box faces over a noise background, painted far to near."""
    h, w = settings.image_height, settings.image_width
    image = (0.3 + rng.uniform(0.0, settings.image_noise, size=(h, w, 3))).astype(np.float32)

    order = sorted(range(len(boxes)), key=lambda i: -math.hypot(boxes[i].cx, boxes[i].cy))
    for i in order:
        corners = _corners(boxes[i])
        pixels, depth = project(corners, projection)
        color = np.array(PALETTE[labels[i] % len(PALETTE)], dtype=np.float32)
        faces = sorted(_FACES, key=lambda f: -float(depth[list(f)].mean()))
        for shade, face in enumerate(faces):
            idx = list(face)
            if np.any(depth[idx] <= 0.1):
                continue
            quad = np.round(pixels[idx]).astype(np.int32)
            tone = color * (0.6 + 0.4 * shade / len(faces))
            cv2.fillConvexPoly(image, quad, tuple(float(v) for v in tone))
    return np.clip(image, 0.0, 1.0)


def _place_boxes(
    settings: GeneratorSettings, rng: np.random.Generator, count: int
) -> tuple[list[Box3D], list[int]]:
    x_min, y_min, _, x_max, y_max, _ = settings.point_cloud_range
    half_fov = settings.fov_fraction * (settings.image_width / 2.0) / settings.focal_length
    boxes: list[Box3D] = []
    labels: list[int] = []
    for _ in range(count):
        for _attempt in range(MAX_PLACEMENT_ATTEMPTS):
            label = int(rng.integers(len(settings.class_names)))
            base = CANONICAL_SIZES.get(settings.class_names[label], FALLBACK_SIZE)
            l, w, h = (
                v * (1.0 + rng.uniform(-settings.size_jitter, settings.size_jitter)) for v in base
            )
            margin = max(l, w)
            cx = rng.uniform(x_min + margin, x_max - margin)
            y_limit = min(half_fov * cx, y_max - margin, -(y_min + margin))
            cy = rng.uniform(-y_limit, y_limit)
            candidate = Box3D(
                cx=cx,
                cy=cy,
                cz=settings.ground_z + h / 2.0,
                l=l,
                w=w,
                h=h,
                yaw=rng.uniform(-math.pi, math.pi),
            )
            if not _overlaps(candidate, boxes):
                boxes.append(candidate)
                labels.append(label)
                break
        else:
            raise SceneGenerationError(
                f"Could not place object {len(boxes) + 1} after {MAX_PLACEMENT_ATTEMPTS} attempts"
            )
    return boxes, labels


def _overlaps(candidate: Box3D, placed: list[Box3D]) -> bool:
    if not placed:
        return False
    grown = list(candidate.as_tuple())
    grown[3] += 2 * PLACEMENT_MARGIN
    grown[4] += 2 * PLACEMENT_MARGIN
    rows = torch.tensor([grown] * len(placed), dtype=torch.float64)
    others = torch.tensor([b.as_tuple() for b in placed], dtype=torch.float64)
    return bool((bev_intersection_pairs(rows, others) > 0).any())


def _surface_points(
    box: Box3D, label: int, settings: GeneratorSettings, rng: np.random.Generator
) -> np.ndarray:
    dims = np.array([box.l, box.w, box.h]) * SURFACE_SHRINK
    n = settings.points_per_object
    # Face pairs weighted by area: x-faces (w*h), y-faces (l*h), z-faces (l*w)
    areas = np.array([dims[1] * dims[2], dims[0] * dims[2], dims[0] * dims[1]])
    axis = rng.choice(3, size=n, p=areas / areas.sum())
    local = rng.uniform(-0.5, 0.5, size=(n, 3)) * dims
    side = rng.choice([-0.5, 0.5], size=n)
    local[np.arange(n), axis] = side * dims[axis]
    local += rng.normal(0.0, settings.point_noise, size=local.shape)
    local = np.clip(local, -0.49 * dims / SURFACE_SHRINK, 0.49 * dims / SURFACE_SHRINK)

    c, s = math.cos(box.yaw), math.sin(box.yaw)
    world = np.empty_like(local)
    world[:, 0] = c * local[:, 0] - s * local[:, 1] + box.cx
    world[:, 1] = s * local[:, 0] + c * local[:, 1] + box.cy
    world[:, 2] = local[:, 2] + box.cz
    base_intensity = 0.4 + 0.5 * (label + 1) / (len(settings.class_names) + 1)
    intensity = np.clip(base_intensity + rng.normal(0.0, 0.05, size=n), 0.0, 1.0)
    return np.hstack([world, intensity[:, None]])


def _clutter_points(
    settings: GeneratorSettings, boxes: list[Box3D], rng: np.random.Generator
) -> np.ndarray:
    x_min, y_min, _, x_max, y_max, _ = settings.point_cloud_range
    n = settings.clutter_points
    xyz = np.column_stack(
        [
            rng.uniform(x_min, x_max, size=n),
            rng.uniform(y_min, y_max, size=n),
            settings.ground_z + rng.normal(0.0, 0.02, size=n),
        ]
    )
    intensity = rng.uniform(0.0, 0.3, size=n)
    points = np.hstack([xyz, intensity[:, None]])
    if boxes:
        box_array = np.array([b.as_tuple() for b in boxes])
        points = points[~points_in_boxes(points, box_array).any(axis=1)]
    return points


def _assemble(
    scene_id: str,
    boxes: list[Box3D],
    labels: list[int],
    settings: GeneratorSettings,
    rng: np.random.Generator,
) -> Scene:
    parts = [_surface_points(b, lab, settings, rng) for b, lab in zip(boxes, labels, strict=True)]
    parts.append(_clutter_points(settings, boxes, rng))
    points = np.vstack(parts)
    projection = camera_projection(
        settings.focal_length, settings.image_height, settings.image_width
    )
    image = render_image(tuple(boxes), tuple(labels), projection, settings, rng)
    return Scene(
        scene_id=scene_id,
        points=points.astype(np.float32),
        image=image,
        projection=projection,
        gt_boxes=tuple(boxes),
        gt_labels=tuple(labels),
    )


def generate_scene(
    settings: GeneratorSettings, rng: np.random.Generator, scene_id: str = "000000"
) -> Scene:
    """Sample one scene; fully determined by the generator state."""
    count = int(rng.integers(settings.min_objects, settings.max_objects + 1))
    boxes, labels = _place_boxes(settings, rng, count)
    scene = _assemble(scene_id, boxes, labels, settings, rng)
    logger.debug("Generated scene_id=%s objects=%d points=%d", scene_id, count, len(scene.points))
    return scene


def scene_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per scene index."""
    return np.random.default_rng([seed, index])


@dataclass(frozen=True, slots=True)
class AugmentationSettings:
    flip_prob: float = 0.5
    max_rotation: float = math.pi / 8
    scale_range: tuple[float, float] = (0.95, 1.05)
    translation_std: float = 0.2

    def __post_init__(self) -> None:
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flip_prob must lie in [0, 1], got {self.flip_prob}")
        if not 0 < self.scale_range[0] <= self.scale_range[1]:
            raise ValueError(f"Invalid scale_range {self.scale_range}")
        if self.max_rotation < 0 or self.translation_std < 0:
            raise ValueError("max_rotation and translation_std must be non-negative")


def augment(
    scene: Scene,
    aug: AugmentationSettings,
    settings: GeneratorSettings,
    rng: np.random.Generator,
) -> Scene:
    """Global flip / rotation / scale / translation; the image is re-rendered.

    Returns the scene unchanged when the transform would move a box center
    out of range.
    """
    flip = rng.uniform() < aug.flip_prob
    angle = rng.uniform(-aug.max_rotation, aug.max_rotation)
    factor = rng.uniform(*aug.scale_range)
    shift = rng.normal(0.0, aug.translation_std, size=3)

    points = scene.points.astype(np.float64)
    boxes = list(scene.gt_boxes)
    if flip:
        points[:, 1] = -points[:, 1]
        boxes = [
            Box3D(b.cx, -b.cy, b.cz, b.l, b.w, b.h, -b.yaw) for b in boxes
        ]
    c, s = math.cos(angle), math.sin(angle)
    x, y = points[:, 0].copy(), points[:, 1].copy()
    points[:, 0] = (c * x - s * y) * factor + shift[0]
    points[:, 1] = (s * x + c * y) * factor + shift[1]
    points[:, 2] = points[:, 2] * factor + shift[2]
    boxes = [b.transformed(yaw_offset=angle).scaled(factor).transformed(translation=shift) for b in boxes]

    lo = np.asarray(settings.point_cloud_range[:3])
    hi = np.asarray(settings.point_cloud_range[3:])
    if any(np.any(np.asarray(b.center) < lo) or np.any(np.asarray(b.center) > hi) for b in boxes):
        logger.debug("Augmentation skipped scene_id=%s (box left range)", scene.scene_id)
        return scene

    image = render_image(tuple(boxes), scene.gt_labels, scene.projection, settings, rng)
    return Scene(
        scene_id=scene.scene_id,
        points=points.astype(np.float32),
        image=image,
        projection=scene.projection,
        gt_boxes=tuple(boxes),
        gt_labels=scene.gt_labels,
        gt_aux=scene.gt_aux,
    )
