"""Rotated 3D box geometry: corners, BEV polygon clipping, IoU and GIoU.

All tensor functions take boxes as (..., 7) rows (cx, cy, cz, l, w, h, yaw)
and are differentiable. The scalar Box3D functions are thin wrappers that
run the same code path in float64.

Corner winding: the BEV footprint is counter-clockwise viewed from above,
starting at (+l/2, +w/2) in the body frame; `corners_3d` lists the bottom
face first (z = cz - h/2) then the top face in the same order.
"""

import math

import numpy as np
import torch

from ..values.box3d import MAX_INTERSECTION_VERTICES, POLYGON_AREA_TOLERANCE, BevPolygon, Box3D

# Points within this distance (scaled by edge length) of a clip edge count as inside
EDGE_TOLERANCE = 1e-9
_UNION_EPS = 1e-12

# Body-frame footprint signs, counter-clockwise
_FOOTPRINT_SIGNS = ((1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0))


def bev_corners(boxes: torch.Tensor) -> torch.Tensor:
    """Footprint corners (..., 4, 2), counter-clockwise."""
    signs = boxes.new_tensor(_FOOTPRINT_SIGNS)  # (4, 2)
    half = torch.stack([boxes[..., 3], boxes[..., 4]], dim=-1)[..., None, :] * 0.5
    local = signs * half  # (..., 4, 2)
    cos = torch.cos(boxes[..., 6])[..., None]
    sin = torch.sin(boxes[..., 6])[..., None]
    x = cos * local[..., 0] - sin * local[..., 1] + boxes[..., 0, None]
    y = sin * local[..., 0] + cos * local[..., 1] + boxes[..., 1, None]
    return torch.stack([x, y], dim=-1)


def corners_3d(boxes: torch.Tensor) -> torch.Tensor:
    """All 8 corners (..., 8, 3): bottom face then top face."""
    footprint = bev_corners(boxes)
    half_h = (boxes[..., 5] * 0.5)[..., None, None]
    cz = boxes[..., 2, None, None]
    bottom = torch.cat([footprint, (cz - half_h).expand(*footprint.shape[:-1], 1)], dim=-1)
    top = torch.cat([footprint, (cz + half_h).expand(*footprint.shape[:-1], 1)], dim=-1)
    return torch.cat([bottom, top], dim=-2)


def _gather_vertices(poly: torch.Tensor, index: torch.Tensor) -> torch.Tensor:
    return torch.gather(poly, 1, index[..., None].expand(*index.shape, 2))


def _clip_half_plane(
    poly: torch.Tensor, count: torch.Tensor, p1: torch.Tensor, p2: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """One Sutherland-Hodgman pass: keep the part of `poly` left of p1 -> p2.

    poly: (P, V, 2) padded vertex buffer, count: (P,) live vertices.
    """
    num, width, _ = poly.shape
    idx = torch.arange(width, device=poly.device)[None, :].expand(num, width)
    valid = idx < count[:, None]
    prev = torch.where(idx == 0, count[:, None] - 1, idx - 1).clamp(min=0)
    start = _gather_vertices(poly, prev)
    end = poly

    edge = (p2 - p1)[:, None, :]
    origin = p1[:, None, :]

    def side(pt: torch.Tensor) -> torch.Tensor:
        rel = pt - origin
        return edge[..., 0] * rel[..., 1] - edge[..., 1] * rel[..., 0]

    d_start, d_end = side(start), side(end)
    start_in = d_start >= -EDGE_TOLERANCE
    end_in = d_end >= -EDGE_TOLERANCE
    crossing = start_in != end_in

    denom = d_start - d_end
    safe = torch.where(denom.abs() > _UNION_EPS, denom, torch.ones_like(denom))
    ratio = (d_start / safe).clamp(0.0, 1.0)
    inter = start + ratio[..., None] * (end - start)

    # Each input vertex emits [intersection?, end?] in this order
    candidates = torch.stack([inter, end], dim=2).reshape(num, 2 * width, 2)
    keep = torch.stack([crossing & valid, end_in & valid], dim=2).reshape(num, 2 * width)
    order = torch.sort((~keep).to(torch.int32), dim=1, stable=True).indices
    candidates = _gather_vertices(candidates, order)[:, :MAX_INTERSECTION_VERTICES]
    new_count = keep.sum(dim=1).clamp(max=MAX_INTERSECTION_VERTICES)
    return candidates, new_count


def clip_polygons(subject: torch.Tensor, clip: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Clip convex quads `subject` (P, 4, 2) by convex CCW quads `clip` (P, 4, 2).

    Returns a padded (P, 8, 2) vertex buffer and per-polygon vertex counts.
    """
    num = subject.shape[0]
    poly = subject.new_zeros((num, MAX_INTERSECTION_VERTICES, 2))
    poly = torch.cat([subject, poly[:, 4:]], dim=1)
    count = torch.full((num,), 4, dtype=torch.long, device=subject.device)
    for k in range(4):
        poly, count = _clip_half_plane(poly, count, clip[:, k], clip[:, (k + 1) % 4])
    return poly, count


def polygon_area(poly: torch.Tensor, count: torch.Tensor) -> torch.Tensor:
    """Shoelace area of padded polygons; zero when fewer than 3 vertices."""
    num, width, _ = poly.shape
    idx = torch.arange(width, device=poly.device)[None, :].expand(num, width)
    valid = idx < count[:, None]
    nxt = torch.where(idx + 1 < count[:, None], idx + 1, torch.zeros_like(idx))
    following = _gather_vertices(poly, nxt)
    cross = poly[..., 0] * following[..., 1] - following[..., 0] * poly[..., 1]
    area = 0.5 * torch.where(valid, cross, torch.zeros_like(cross)).sum(dim=1)
    return torch.where(count >= 3, area, torch.zeros_like(area))


def bev_intersection_pairs(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Footprint intersection area of row-aligned boxes (P, 7) x (P, 7) -> (P,).

    Clipping runs in both directions and the results are averaged so the
    value is symmetric in its arguments bit for bit.
    """
    ca, cb = bev_corners(a), bev_corners(b)
    area_ab = polygon_area(*clip_polygons(ca, cb))
    area_ba = polygon_area(*clip_polygons(cb, ca))
    area = 0.5 * (area_ab + area_ba)
    return torch.where(area < POLYGON_AREA_TOLERANCE, torch.zeros_like(area), area)


def _height_overlap(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    top = torch.minimum(a[:, 2] + 0.5 * a[:, 5], b[:, 2] + 0.5 * b[:, 5])
    bottom = torch.maximum(a[:, 2] - 0.5 * a[:, 5], b[:, 2] - 0.5 * b[:, 5])
    return (top - bottom).clamp(min=0.0)


def _volume(boxes: torch.Tensor) -> torch.Tensor:
    return boxes[:, 3] * boxes[:, 4] * boxes[:, 5]


def _safe_ratio(num: torch.Tensor, den: torch.Tensor) -> torch.Tensor:
    ok = den > _UNION_EPS
    return torch.where(ok, num / torch.where(ok, den, torch.ones_like(den)), torch.zeros_like(num))


def iou_3d_pairs(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    inter = bev_intersection_pairs(a, b) * _height_overlap(a, b)
    union = _volume(a) + _volume(b) - inter
    return _safe_ratio(inter, union)


def iou_bev_pairs(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    inter = bev_intersection_pairs(a, b)
    union = a[:, 3] * a[:, 4] + b[:, 3] * b[:, 4] - inter
    return _safe_ratio(inter, union)


def giou_3d_pairs(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """GIoU with the smallest axis-aligned box enclosing both corner sets."""
    inter = bev_intersection_pairs(a, b) * _height_overlap(a, b)
    union = _volume(a) + _volume(b) - inter
    iou = _safe_ratio(inter, union)
    corners = torch.cat([corners_3d(a), corners_3d(b)], dim=1)  # (P, 16, 3)
    extent = corners.amax(dim=1) - corners.amin(dim=1)
    enclosing = extent.prod(dim=1)
    return iou - _safe_ratio(enclosing - union, enclosing)


def _pairwise(fn, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    n, m = a.shape[0], b.shape[0]
    if n == 0 or m == 0:
        return a.new_zeros((n, m))
    rows = a[:, None, :].expand(n, m, a.shape[1]).reshape(n * m, -1)
    cols = b[None, :, :].expand(n, m, b.shape[1]).reshape(n * m, -1)
    return fn(rows, cols).reshape(n, m)


def iou_3d_matrix(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """(N, 7) x (M, 7) -> (N, M) 3D IoU."""
    return _pairwise(iou_3d_pairs, a, b)


def iou_bev_matrix(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    return _pairwise(iou_bev_pairs, a, b)


def giou_3d_matrix(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    return _pairwise(giou_3d_pairs, a, b)


def nms_bev(boxes: torch.Tensor, scores: torch.Tensor, iou_threshold: float) -> torch.Tensor:
    """Greedy class-agnostic NMS on footprint IoU; returns kept indices by descending score."""
    if boxes.shape[0] == 0:
        return torch.zeros((0,), dtype=torch.long, device=boxes.device)
    order = torch.sort(scores, descending=True, stable=True).indices
    overlaps = iou_bev_matrix(boxes[order], boxes[order])
    suppressed = torch.zeros(order.shape[0], dtype=torch.bool, device=boxes.device)
    keep: list[int] = []
    for i in range(order.shape[0]):
        if suppressed[i]:
            continue
        keep.append(i)
        suppressed |= overlaps[i] > iou_threshold
    return order[torch.tensor(keep, dtype=torch.long, device=boxes.device)]


def points_in_boxes(points: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    """(K, >=3) points x (M, 7) boxes -> (K, M) containment mask (closed boxes)."""
    if boxes.shape[0] == 0:
        return np.zeros((points.shape[0], 0), dtype=bool)
    rel = points[:, None, :3] - boxes[None, :, :3]
    cos, sin = np.cos(boxes[:, 6]), np.sin(boxes[:, 6])
    local_x = cos * rel[..., 0] + sin * rel[..., 1]
    local_y = -sin * rel[..., 0] + cos * rel[..., 1]
    tol = 1e-9
    return (
        (np.abs(local_x) <= 0.5 * boxes[:, 3] + tol)
        & (np.abs(local_y) <= 0.5 * boxes[:, 4] + tol)
        & (np.abs(rel[..., 2]) <= 0.5 * boxes[:, 5] + tol)
    )


# Scalar API over Box3D values


def _as_row(box: Box3D) -> torch.Tensor:
    return torch.tensor([box.as_tuple()], dtype=torch.float64)


def box_corners(box: Box3D) -> tuple[tuple[float, float, float], ...]:
    """The 8 corners of `box` in the documented winding."""
    return tuple(tuple(c) for c in corners_3d(_as_row(box))[0].tolist())  # type: ignore[misc]


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    return float(bev_intersection_pairs(_as_row(a), _as_row(b))[0])


def intersection_polygon(a: Box3D, b: Box3D) -> BevPolygon:
    """Footprint intersection as a polygon; empty for zero-area overlaps."""
    poly, count = clip_polygons(bev_corners(_as_row(a)), bev_corners(_as_row(b)))
    if float(polygon_area(poly, count)[0]) < POLYGON_AREA_TOLERANCE:
        return BevPolygon.empty()
    vertices: list[tuple[float, float]] = []
    for x, y in poly[0, : int(count[0])].tolist():
        if vertices and math.dist(vertices[-1], (x, y)) <= EDGE_TOLERANCE:
            continue
        vertices.append((x, y))
    if len(vertices) > 1 and math.dist(vertices[0], vertices[-1]) <= EDGE_TOLERANCE:
        vertices.pop()
    if len(vertices) < 3:
        return BevPolygon.empty()
    return BevPolygon(vertices=tuple(vertices))


def iou_3d(a: Box3D, b: Box3D) -> float:
    return float(iou_3d_pairs(_as_row(a), _as_row(b))[0])


def giou_3d(a: Box3D, b: Box3D) -> float:
    return float(giou_3d_pairs(_as_row(a), _as_row(b))[0])


def iou_bev(a: Box3D, b: Box3D) -> float:
    return float(iou_bev_pairs(_as_row(a), _as_row(b))[0])
