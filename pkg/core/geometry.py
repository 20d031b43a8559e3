"""Camera projection and the single polygon fill rule shared by every rasterizing path.

A pixel (x, y) belongs to a polygon when its center (x + 0.5, y + 0.5) lies inside or
on the boundary of the counter-clockwise convex hull. The generator, the refiner's
masks and proxies, and the metrics all go through ``fill_convex`` so their silhouettes
agree pixel for pixel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.scene_model import BoxPose3D, Camera


Rect = Tuple[float, float, float, float]

BOX_EDGES: Tuple[Tuple[int, int], ...] = (
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
)


@dataclass(frozen=True)
class ScreenPolygon:
    hull: np.ndarray  # Nx2 (u, v), counter-clockwise
    rect: Rect  # (u_min, v_min, u_max, v_max)
    depth: float  # mean camera-space depth of the kept vertices

    def shifted(self, du: float, dv: float = 0.0) -> "ScreenPolygon":
        u0, v0, u1, v1 = self.rect
        return ScreenPolygon(
            hull=self.hull + np.array([du, dv]),
            rect=(u0 + du, v0 + dv, u1 + du, v1 + dv),
            depth=self.depth,
        )


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull; counter-clockwise, no repeated endpoint."""
    unique = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(unique) <= 2:
        return unique

    lower: List[np.ndarray] = []
    for point in unique:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], point) <= 0.0:
            lower.pop()
        lower.append(point)

    upper: List[np.ndarray] = []
    for point in unique[::-1]:
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], point) <= 0.0:
            upper.pop()
        upper.append(point)

    return np.array(lower[:-1] + upper[:-1])


def project_points(camera_points: np.ndarray, camera: Camera) -> np.ndarray:
    z = camera_points[:, 2]
    u = camera.fx * camera_points[:, 0] / z + camera.cx
    v = camera.fy * camera_points[:, 1] / z + camera.cy
    return np.stack([u, v], axis=1)


def project_convex(
    world_points: np.ndarray,
    edges: Iterable[Tuple[int, int]],
    camera: Camera,
) -> Optional[ScreenPolygon]:
    """Clip a convex solid against the near plane and project its outline."""
    points = camera.world_to_camera(world_points)
    near = camera.near
    depth = points[:, 2]
    if np.all(depth <= near):
        return None

    kept = [points[depth > near]]
    for i, j in edges:
        zi, zj = depth[i], depth[j]
        if (zi > near) != (zj > near):
            t = (near - zi) / (zj - zi)
            kept.append((points[i] + t * (points[j] - points[i]))[None, :])
    clipped = np.concatenate(kept, axis=0)
    clipped[:, 2] = np.maximum(clipped[:, 2], near)

    hull = convex_hull(project_points(clipped, camera))
    rect = (
        float(hull[:, 0].min()),
        float(hull[:, 1].min()),
        float(hull[:, 0].max()),
        float(hull[:, 1].max()),
    )
    return ScreenPolygon(hull=hull, rect=rect, depth=float(clipped[:, 2].mean()))


def project_box(box: BoxPose3D, camera: Camera) -> Optional[ScreenPolygon]:
    return project_convex(box.corners(), BOX_EDGES, camera)


def camera_depth(point: Sequence[float], camera: Camera) -> float:
    return float(camera.world_to_camera(np.asarray(point, dtype=float)[None, :])[0, 2])


def fill_convex(hull: np.ndarray, width: int, height: int) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    if len(hull) < 3:
        return mask

    x0 = max(int(np.floor(hull[:, 0].min() - 0.5)), 0)
    x1 = min(int(np.ceil(hull[:, 0].max() - 0.5)), width - 1)
    y0 = max(int(np.floor(hull[:, 1].min() - 0.5)), 0)
    y1 = min(int(np.ceil(hull[:, 1].max() - 0.5)), height - 1)
    if x1 < x0 or y1 < y0:
        return mask

    xs = np.arange(x0, x1 + 1, dtype=float) + 0.5
    ys = np.arange(y0, y1 + 1, dtype=float) + 0.5
    grid_x, grid_y = np.meshgrid(xs, ys)
    inside = np.ones(grid_x.shape, dtype=bool)
    for a, b in zip(hull, np.roll(hull, -1, axis=0)):
        cross = (b[0] - a[0]) * (grid_y - a[1]) - (b[1] - a[1]) * (grid_x - a[0])
        inside &= cross >= 0.0

    mask[y0 : y1 + 1, x0 : x1 + 1] = inside
    return mask


def clip_rect(rect: Rect, width: int, height: int) -> Optional[Rect]:
    u0, v0, u1, v1 = rect
    clipped = (max(u0, 0.0), max(v0, 0.0), min(u1, float(width)), min(v1, float(height)))
    if clipped[2] <= clipped[0] or clipped[3] <= clipped[1]:
        return None
    return clipped


def rect_area(rect: Optional[Rect]) -> float:
    if rect is None:
        return 0.0
    return max(rect[2] - rect[0], 0.0) * max(rect[3] - rect[1], 0.0)


def rect_iou(a: Optional[Rect], b: Optional[Rect]) -> float:
    if a is None or b is None:
        return 0.0
    inter = (max(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), min(a[3], b[3]))
    overlap = rect_area(inter) if inter[2] > inter[0] and inter[3] > inter[1] else 0.0
    union = rect_area(a) + rect_area(b) - overlap
    return overlap / union if union > 0.0 else 0.0


def mask_rect(mask: np.ndarray) -> Optional[Rect]:
    """Pixel-edge bounding rectangle of a boolean mask."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        return None
    return (float(cols[0]), float(rows[0]), float(cols[-1] + 1), float(rows[-1] + 1))


def crop_bounds(rect: Rect) -> Tuple[int, int, int, int]:
    """Integer pixel window (x0, y0, x1, y1) covering a clipped float rectangle."""
    return (
        int(np.floor(rect[0])),
        int(np.floor(rect[1])),
        int(np.ceil(rect[2])),
        int(np.ceil(rect[3])),
    )
