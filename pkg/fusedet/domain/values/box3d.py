"""Oriented 3D box and BEV polygon value objects."""

import math
from collections.abc import Sequence
from dataclasses import dataclass

# Business rule constants
MIN_BOX_SIZE = 1e-6  # meters
BOX_DIM = 7
POLYGON_AREA_TOLERANCE = 1e-9  # m^2
MAX_INTERSECTION_VERTICES = 8


def wrap_angle(angle: float) -> float:
    """Wrap an angle in radians into [-pi, pi)."""
    wrapped = (angle + math.pi) % (2.0 * math.pi) - math.pi
    if wrapped >= math.pi:
        wrapped -= 2.0 * math.pi
    return wrapped


@dataclass(frozen=True, slots=True)
class Box3D:
    """Immutable 7-DoF oriented box in metric space.

    Invariants:
    - l, w, h >= 1e-6 m (degenerate boxes are rejected, never clamped)
    - yaw wrapped into [-pi, pi)
    - all fields finite
    """

    cx: float
    cy: float
    cz: float
    l: float  # noqa: E741
    w: float
    h: float
    yaw: float = 0.0

    def __post_init__(self) -> None:
        values = self.as_tuple()
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"Box fields must be finite, got {values}")
        if min(self.l, self.w, self.h) < MIN_BOX_SIZE:
            raise ValueError(
                f"Box sizes must be >= {MIN_BOX_SIZE} m, got l={self.l} w={self.w} h={self.h}"
            )
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "Box3D":
        """Create a box from (cx, cy, cz, l, w, h, yaw)."""
        if len(values) != BOX_DIM:
            raise ValueError(f"Expected {BOX_DIM} box parameters, got {len(values)}")
        return cls(*(float(v) for v in values))

    def as_tuple(self) -> tuple[float, float, float, float, float, float, float]:
        return (self.cx, self.cy, self.cz, self.l, self.w, self.h, self.yaw)

    @property
    def center(self) -> tuple[float, float, float]:
        return (self.cx, self.cy, self.cz)

    @property
    def volume(self) -> float:
        return self.l * self.w * self.h

    def transformed(
        self, yaw_offset: float = 0.0, translation: Sequence[float] = (0.0, 0.0, 0.0)
    ) -> "Box3D":
        """Apply a rigid motion: rotate about the vertical axis through the origin, then translate."""
        c, s = math.cos(yaw_offset), math.sin(yaw_offset)
        tx, ty, tz = translation
        return Box3D(
            cx=c * self.cx - s * self.cy + tx,
            cy=s * self.cx + c * self.cy + ty,
            cz=self.cz + tz,
            l=self.l,
            w=self.w,
            h=self.h,
            yaw=self.yaw + yaw_offset,
        )

    def scaled(self, factor: float) -> "Box3D":
        """Scale center and size about the origin."""
        if factor <= 0:
            raise ValueError(f"Scale factor must be positive, got {factor}")
        return Box3D(
            cx=self.cx * factor,
            cy=self.cy * factor,
            cz=self.cz * factor,
            l=self.l * factor,
            w=self.w * factor,
            h=self.h * factor,
            yaw=self.yaw,
        )


@dataclass(frozen=True, slots=True)
class BevPolygon:
    """Convex polygon in the BEV plane, vertices counter-clockwise.

    An empty polygon stands for a zero-area intersection.
    """

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        count = len(self.vertices)
        if count and not (3 <= count <= MAX_INTERSECTION_VERTICES):
            raise ValueError(
                f"Polygon must have 3-{MAX_INTERSECTION_VERTICES} vertices, got {count}"
            )
        if self.signed_area < -POLYGON_AREA_TOLERANCE:
            raise ValueError("Polygon vertices must be counter-clockwise")

    @classmethod
    def empty(cls) -> "BevPolygon":
        return cls(vertices=())

    @property
    def is_empty(self) -> bool:
        return not self.vertices

    @property
    def signed_area(self) -> float:
        """Shoelace area; positive for counter-clockwise ordering."""
        total = 0.0
        count = len(self.vertices)
        for i in range(count):
            x1, y1 = self.vertices[i]
            x2, y2 = self.vertices[(i + 1) % count]
            total += x1 * y2 - x2 * y1
        return 0.5 * total

    @property
    def area(self) -> float:
        return max(self.signed_area, 0.0)
