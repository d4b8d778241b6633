"""KITTI-format labels, calibration and point files.

Camera frame (KITTI): x right, y down, z forward. World/LiDAR frame: x
forward, y left, z up. Camera-frame boxes keep KITTI semantics inside a
Box3D: (cx, cy, cz) is the volumetric center in camera axes, `h` runs along
camera y and `yaw` is rotation_y. The bottom-center <-> volumetric-center
shift happens only in `parse_kitti_label` and the serializers.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fusedet.domain.errors import KittiParseError
from fusedet.domain.values.box3d import Box3D, wrap_angle
from fusedet.domain.values.scene import ObjectAux

logger = logging.getLogger(__name__)

LABEL_FIELDS = 15
PREDICTION_FIELDS = 16
DONT_CARE = "DontCare"
SCORE_DECIMALS = 6


@dataclass(frozen=True, slots=True)
class KittiRecord:
    """One label or prediction line.

    `box` is None for DontCare rows and sentinel dimensions.
    """

    class_name: str
    truncated: float
    occluded: int
    alpha: float
    bbox: tuple[float, float, float, float]
    box: Box3D | None
    score: float | None = None

    @property
    def is_ignorable(self) -> bool:
        return self.class_name == DONT_CARE or self.box is None

    def aux(self) -> ObjectAux:
        return ObjectAux(truncated=self.truncated, occluded=self.occluded, bbox=self.bbox)


def parse_kitti_label(line: str, line_number: int | None = None) -> KittiRecord:
    """Parse a 15-field label (or 16-field prediction) line."""
    fields = line.split()
    if len(fields) not in (LABEL_FIELDS, PREDICTION_FIELDS):
        raise KittiParseError(
            f"expected {LABEL_FIELDS} or {PREDICTION_FIELDS} fields, got {len(fields)}", line_number
        )
    try:
        values = [float(v) for v in fields[1:]]
    except ValueError as e:
        raise KittiParseError(f"non-numeric field ({e})", line_number) from e
    if not all(math.isfinite(v) for v in values):
        raise KittiParseError("non-finite field", line_number)

    truncated, occluded, alpha = values[0], int(values[1]), values[2]
    bbox = (values[3], values[4], values[5], values[6])
    h, w, l = values[7], values[8], values[9]  # noqa: E741
    x, y, z = values[10], values[11], values[12]
    rotation_y = values[13]
    score = values[14] if len(fields) == PREDICTION_FIELDS else None

    box = None
    if fields[0] != DONT_CARE and min(h, w, l) > 0:
        box = Box3D(cx=x, cy=y - h / 2.0, cz=z, l=l, w=w, h=h, yaw=rotation_y)
    return KittiRecord(
        class_name=fields[0],
        truncated=truncated,
        occluded=occluded,
        alpha=alpha,
        bbox=bbox,
        box=box,
        score=score,
    )


def _geometry_fields(record: KittiRecord) -> list[float]:
    if record.box is None:
        return [-1.0, -1.0, -1.0, -1000.0, -1000.0, -1000.0, -10.0]
    b = record.box
    return [b.h, b.w, b.l, b.cx, b.cy + b.h / 2.0, b.cz, b.yaw]


def serialize_label(record: KittiRecord) -> str:
    """15-field label line, numbers at 2 decimals."""
    numbers = [record.truncated, float(record.occluded), record.alpha, *record.bbox]
    numbers += _geometry_fields(record)
    parts = [record.class_name, f"{numbers[0]:.2f}", str(record.occluded)]
    parts += [f"{v:.2f}" for v in numbers[2:]]
    return " ".join(parts)


def serialize_prediction(record: KittiRecord, score: float | None = None) -> str:
    """16-field prediction line: the label fields plus a trailing score at 6 decimals."""
    value = record.score if score is None else score
    if value is None or not 0.0 <= value <= 1.0:
        raise ValueError(f"Prediction score must lie in [0, 1], got {value}")
    return f"{serialize_label(record)} {value:.{SCORE_DECIMALS}f}"


# Frame bridge


def camera_box_to_world(box: Box3D) -> Box3D:
    """Camera-frame KITTI box -> world box (x forward, y left, z up)."""
    return Box3D(
        cx=box.cz,
        cy=-box.cx,
        cz=-box.cy,
        l=box.l,
        w=box.w,
        h=box.h,
        yaw=wrap_angle(-box.yaw - math.pi / 2.0),
    )


def world_box_to_camera(box: Box3D) -> Box3D:
    return Box3D(
        cx=-box.cy,
        cy=-box.cz,
        cz=box.cx,
        l=box.l,
        w=box.w,
        h=box.h,
        yaw=wrap_angle(-box.yaw - math.pi / 2.0),
    )


def observation_angle(camera_box: Box3D) -> float:
    """KITTI alpha = rotation_y - atan2(x, z)."""
    return wrap_angle(camera_box.yaw - math.atan2(camera_box.cx, camera_box.cz))


def image_rect(
    world_box: Box3D, projection: np.ndarray, image_hw: tuple[int, int]
) -> tuple[float, float, float, float]:
    """Pixel bounding rectangle of the projected corners, clipped to the image."""
    c, s = math.cos(world_box.yaw), math.sin(world_box.yaw)
    corners = []
    for sx, sy in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
        lx, ly = sx * world_box.l / 2, sy * world_box.w / 2
        x = c * lx - s * ly + world_box.cx
        y = s * lx + c * ly + world_box.cy
        for sz in (-1, 1):
            corners.append((x, y, world_box.cz + sz * world_box.h / 2, 1.0))
    pixels = np.asarray(corners) @ projection.T
    depth = pixels[:, 2]
    if np.any(depth <= 1e-6):
        return (0.0, 0.0, 0.0, 0.0)
    uv = pixels[:, :2] / depth[:, None]
    h, w = image_hw
    x1, y1 = np.clip(uv.min(axis=0), 0, [w, h])
    x2, y2 = np.clip(uv.max(axis=0), 0, [w, h])
    return (float(x1), float(y1), float(x2), float(y2))


def world_record(
    class_name: str,
    world_box: Box3D,
    projection: np.ndarray,
    image_hw: tuple[int, int],
    score: float | None = None,
    truncated: float = 0.0,
    occluded: int = 0,
) -> KittiRecord:
    """KITTI record for a world-frame box seen by the scene camera."""
    camera = world_box_to_camera(world_box)
    return KittiRecord(
        class_name=class_name,
        truncated=truncated,
        occluded=occluded,
        alpha=observation_angle(camera),
        bbox=image_rect(world_box, projection, image_hw),
        box=camera,
        score=score,
    )


# Files


def read_labels(path: Path) -> list[KittiRecord]:
    records = []
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if line.strip():
                records.append(parse_kitti_label(line, number))
    return records


def write_labels(path: Path, lines: list[str]) -> None:
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")


def read_calib(path: Path) -> np.ndarray:
    """Single line of 12 floats (optionally prefixed `P2:`) -> 3x4 matrix."""
    text = path.read_text(encoding="utf-8").split()
    if text and text[0].endswith(":"):
        text = text[1:]
    if len(text) != 12:
        raise KittiParseError(f"calibration needs 12 values, got {len(text)}", 1)
    try:
        return np.array([float(v) for v in text], dtype=np.float64).reshape(3, 4)
    except ValueError as e:
        raise KittiParseError(f"non-numeric calibration value ({e})", 1) from e


def write_calib(path: Path, projection: np.ndarray) -> None:
    path.write_text(" ".join(f"{v:.12e}" for v in projection.reshape(-1)) + "\n", encoding="utf-8")


def read_points(path: Path) -> np.ndarray:
    """Little-endian float32 K x 4 point file."""
    data = np.fromfile(path, dtype="<f4")
    if data.size % 4:
        raise ValueError(f"{path}: size {data.size} is not a multiple of 4")
    return data.reshape(-1, 4)


def write_points(path: Path, points: np.ndarray) -> None:
    np.ascontiguousarray(points, dtype="<f4").tofile(path)
