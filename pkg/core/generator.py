"""Deterministic procedural renderer for conditioned multiview scenes.

Backgrounds come from the weather/time signature table, objects are painted as
their category's primitive assembly in far-to-near order, and scripted faults
are applied on top so the evaluation loop has something to catch.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from core.condition_encoder import ConditionSet
from core.config import worker_count
from core.geometry import (
    BOX_EDGES,
    ScreenPolygon,
    camera_depth,
    clip_rect,
    crop_bounds,
    fill_convex,
    project_box,
    project_convex,
    project_points,
)
from core.scene_model import BoxPose3D, Camera, FaultSpec, ObjectSpec, box_at, local_to_world
from modules.primitives import (
    COLOR_PALETTE,
    PrimitiveTemplate,
    require_category,
    rotated_color,
    style_shading,
)
from modules.signatures import (
    FOG_COLOR,
    FOG_DISTANCE_M,
    LANE_COLOR,
    RAIN_MIX,
    RAIN_VEIL,
    SNOW_OBJECT_MIX,
    SUBSTITUTE_WEATHER,
    TIME_GAIN,
    background_signature,
)


logger = logging.getLogger(__name__)

LANE_STEP_M = 0.05
RING_POINTS = 8
WHITE = (255.0, 255.0, 255.0)


@dataclass(frozen=True, eq=False)
class Frame:
    pixels: np.ndarray  # HxWx3 uint8
    instance_ids: np.ndarray  # HxW int32, 0 = background, k + 1 = object k
    view: int
    frame_index: int

    def __post_init__(self) -> None:
        if self.pixels.shape[:2] != self.instance_ids.shape:
            raise ValueError(
                f"Frame ({self.view}, {self.frame_index}): pixels {self.pixels.shape[:2]} "
                f"and instance ids {self.instance_ids.shape} differ"
            )
        self.pixels.setflags(write=False)
        self.instance_ids.setflags(write=False)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])


@dataclass(frozen=True, eq=False)
class MultiviewVideo:
    frames: Tuple[Tuple[Frame, ...], ...]  # frames[v][t]
    cameras: Tuple[Tuple[Camera, ...], ...]  # posed world->camera per (v, t)
    seed: int
    conditions_fingerprint: str
    iteration: int = 0
    refined_objects: Tuple[int, ...] = field(default=())

    @property
    def num_views(self) -> int:
        return len(self.frames)

    @property
    def num_frames(self) -> int:
        return len(self.frames[0]) if self.frames else 0

    def frame(self, view: int, frame_index: int) -> Frame:
        return self.frames[view][frame_index]

    def camera(self, view: int, frame_index: int) -> Camera:
        return self.cameras[view][frame_index]

    def cells(self):
        for v, row in enumerate(self.frames):
            for t, frame in enumerate(row):
                yield v, t, frame

    def replace_frames(
        self,
        frames: Sequence[Sequence[Frame]],
        refined_objects: Sequence[int] = (),
    ) -> "MultiviewVideo":
        return MultiviewVideo(
            frames=tuple(tuple(row) for row in frames),
            cameras=self.cameras,
            seed=self.seed,
            conditions_fingerprint=self.conditions_fingerprint,
            iteration=self.iteration,
            refined_objects=tuple(sorted(set(self.refined_objects) | set(refined_objects))),
        )


# ---------------------------------------------------------------------------
# Shading
# ---------------------------------------------------------------------------


def _mix(colors: np.ndarray, target: Sequence[float], fraction) -> np.ndarray:
    target_array = np.asarray(target, dtype=float)
    fraction = np.asarray(fraction, dtype=float)
    if fraction.ndim:
        fraction = fraction[:, None]
    return colors + fraction * (target_array - colors)


def apply_atmosphere(colors: np.ndarray, depth: np.ndarray, weather: str) -> np.ndarray:
    """Weather effect on Nx3 object or lane colors seen at the given depths."""
    colors = np.asarray(colors, dtype=float)
    if weather == "rain":
        return _mix(colors, RAIN_VEIL, RAIN_MIX)
    if weather == "fog":
        fraction = 1.0 - np.exp(-np.asarray(depth, dtype=float) / FOG_DISTANCE_M)
        return _mix(colors, FOG_COLOR, fraction)
    if weather == "snow":
        return _mix(colors, WHITE, SNOW_OBJECT_MIX)
    return colors.copy()


def apply_time(colors: np.ndarray, time_of_day: str) -> np.ndarray:
    return colors * np.asarray(TIME_GAIN[time_of_day], dtype=float)


def quantize(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# Background
# ---------------------------------------------------------------------------


def _pixel_rays(camera: Camera) -> Tuple[np.ndarray, np.ndarray]:
    us = np.arange(camera.width, dtype=float) + 0.5
    vs = np.arange(camera.height, dtype=float) + 0.5
    grid_u, grid_v = np.meshgrid(us, vs)
    directions = np.stack(
        [(grid_u - camera.cx) / camera.fx, (grid_v - camera.cy) / camera.fy, np.ones_like(grid_u)],
        axis=-1,
    )
    rotation = camera.rotation_matrix()
    origin = -rotation.T @ np.asarray(camera.translation, dtype=float)
    return directions @ rotation, origin


def _lane_samples(road_map: Tuple[Tuple[Tuple[float, float], ...], ...]) -> np.ndarray:
    samples: List[np.ndarray] = []
    for polyline in road_map:
        points = np.asarray(polyline, dtype=float)
        for a, b in zip(points, points[1:]):
            steps = max(int(math.ceil(np.linalg.norm(b - a) / LANE_STEP_M)), 1)
            t = np.linspace(0.0, 1.0, steps + 1)[:, None]
            samples.append(a + t * (b - a))
    if not samples:
        return np.zeros((0, 3))
    xy = np.concatenate(samples, axis=0)
    return np.concatenate([xy, np.zeros((len(xy), 1))], axis=1)


@lru_cache(maxsize=512)
def render_base(
    weather: str,
    time_of_day: str,
    camera: Camera,
    road_map: Tuple[Tuple[Tuple[float, float], ...], ...],
) -> np.ndarray:
    """Empty-scene frame for one camera: sky, ground and lanes under (weather, time). Read-only."""
    rays, origin = _pixel_rays(camera)
    dz = rays[..., 2]
    ground = (dz < 0.0) & (origin[2] > 0.0)
    sky_color, ground_color = background_signature(weather, time_of_day)
    colors = np.empty(rays.shape)
    colors[~ground] = sky_color
    colors[ground] = ground_color

    lanes = _lane_samples(road_map)
    if len(lanes):
        in_camera = camera.world_to_camera(lanes)
        ahead = in_camera[:, 2] > camera.near
        uv = project_points(in_camera[ahead], camera)
        cols = np.floor(uv[:, 0]).astype(int)
        rows = np.floor(uv[:, 1]).astype(int)
        on_image = (cols >= 0) & (cols < camera.width) & (rows >= 0) & (rows < camera.height)
        distance = np.linalg.norm(lanes[ahead][on_image] - origin, axis=1)
        lane_colors = apply_atmosphere(np.tile(LANE_COLOR, (len(distance), 1)), distance, weather)
        colors[rows[on_image], cols[on_image]] = apply_time(lane_colors, time_of_day)

    base = quantize(colors)
    base.setflags(write=False)
    return base


# ---------------------------------------------------------------------------
# Primitive assemblies
# ---------------------------------------------------------------------------


def _box_corners(center: np.ndarray, extent: np.ndarray) -> np.ndarray:
    signs = np.array(
        [
            [1, 1, -1], [-1, 1, -1], [-1, -1, -1], [1, -1, -1],
            [1, 1, 1], [-1, 1, 1], [-1, -1, 1], [1, -1, 1],
        ],
        dtype=float,
    )
    return center + signs * (extent / 2.0)


def _ring(center: np.ndarray, u: np.ndarray, w: np.ndarray, radius: float) -> np.ndarray:
    angles = np.arange(RING_POINTS) * (2.0 * math.pi / RING_POINTS)
    return center + radius * (np.cos(angles)[:, None] * u + np.sin(angles)[:, None] * w)


def _tube_points(start: np.ndarray, end: np.ndarray, radius: float, capped: bool) -> np.ndarray:
    axis = end - start
    length = float(np.linalg.norm(axis))
    direction = axis / length if length > 0.0 else np.array([0.0, 0.0, 1.0])
    helper = np.array([1.0, 0.0, 0.0]) if abs(direction[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(direction, helper)
    u /= np.linalg.norm(u)
    w = np.cross(direction, u)

    parts = [_ring(start, u, w, radius), _ring(end, u, w, radius)]
    if capped:
        # Each hemispherical cap: one ring at 45 degrees latitude plus the pole.
        offset = radius * math.sqrt(0.5)
        for anchor, outward in ((start, -direction), (end, direction)):
            parts.append(_ring(anchor + outward * offset, u, w, offset))
            parts.append((anchor + outward * radius)[None, :])
    return np.concatenate(parts, axis=0)


def primitive_solid(
    template: PrimitiveTemplate,
    box: BoxPose3D,
) -> Tuple[np.ndarray, Sequence[Tuple[int, int]]]:
    """World-space vertices of one primitive plus the edges used for near-plane clipping."""
    scale = np.asarray(box.size, dtype=float)
    if template.shape == "box":
        local = _box_corners(np.asarray(template.center) * scale, np.asarray(template.extent) * scale)
        edges: Sequence[Tuple[int, int]] = BOX_EDGES
    else:
        radius = template.radius * min(box.size[1], box.size[2])
        local = _tube_points(
            np.asarray(template.start) * scale,
            np.asarray(template.end) * scale,
            radius,
            capped=template.shape == "capsule",
        )
        edges = tuple(combinations(range(len(local)), 2))
    return local_to_world(local, box.center, box.yaw), edges


@lru_cache(maxsize=1024)
def speckle_field(seed: int, view: int, height: int, width: int) -> np.ndarray:
    """Per-camera dirt pattern; fixed across frames so a parked object keeps its surface."""
    field_values = np.random.default_rng([seed, view]).random((height, width))
    field_values.setflags(write=False)
    return field_values


def render_assembly(
    category: str,
    color: str,
    style_tokens: Sequence[str],
    box: BoxPose3D,
    camera: Camera,
    weather: str,
    time_of_day: str,
    speckle: np.ndarray,
    shift: Tuple[float, float] = (0.0, 0.0),
) -> Tuple[np.ndarray, np.ndarray]:
    """Shaded float canvas and coverage mask of an object's category silhouette."""
    height, width = camera.height, camera.width
    canvas = np.zeros((height, width, 3))
    covered = np.zeros((height, width), dtype=bool)
    gain, exponent, speckle_depth = style_shading(style_tokens)
    palette = np.asarray(COLOR_PALETTE[color], dtype=float)

    for template in require_category(category):
        points, edges = primitive_solid(template, box)
        polygon = project_convex(points, edges, camera)
        if polygon is None:
            continue
        if shift != (0.0, 0.0):
            polygon = polygon.shifted(*shift)
        mask = fill_convex(polygon.hull, width, height)
        count = int(mask.sum())
        if count == 0:
            continue

        colors = np.tile(palette * (template.tone**exponent) * gain, (count, 1))
        if speckle_depth > 0.0:
            colors *= (1.0 - speckle_depth * speckle[mask])[:, None]
        colors = apply_atmosphere(colors, np.full(count, polygon.depth), weather)
        canvas[mask] = apply_time(colors, time_of_day)
        covered |= mask
    return canvas, covered


# ---------------------------------------------------------------------------
# Faults
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FaultIndex:
    by_target: Dict[int, Tuple[FaultSpec, ...]]
    weather: Tuple[FaultSpec, ...]

    @classmethod
    def build(cls, fault_plan: Sequence[FaultSpec]) -> "FaultIndex":
        by_target: Dict[int, List[FaultSpec]] = {}
        weather: List[FaultSpec] = []
        for fault in fault_plan:
            if fault.kind == "weather_tint":
                weather.append(fault)
            elif fault.target is not None:
                by_target.setdefault(fault.target, []).append(fault)
        return cls(
            by_target={target: tuple(faults) for target, faults in by_target.items()},
            weather=tuple(weather),
        )

    def find(self, kind: str, index: int) -> Optional[FaultSpec]:
        for fault in self.by_target.get(index, ()):
            if fault.kind == kind:
                return fault
        return None


def jitter_shift(faults: FaultIndex, index: int, frame_index: int) -> Tuple[float, float]:
    fault = faults.find("jitter_box", index)
    if fault is None:
        return (0.0, 0.0)
    offset = float(math.ceil(10.0 * fault.severity))
    return (offset if frame_index % 2 == 0 else -offset, 0.0)


def wrong_color_fires(fault: Optional[FaultSpec], frame_index: int) -> bool:
    """Full severity repaints every frame; anything less repaints the odd frames only."""
    if fault is None:
        return False
    return fault.severity >= 1.0 or frame_index % 2 == 1


def blur_radius(severity: float) -> int:
    return int(math.ceil(3.0 * severity))


def box_blur(pixels: np.ndarray, rect, radius: int) -> None:
    """In-place box blur of a float HxWx3 image over the pixels covered by rect."""
    clipped = clip_rect(rect, pixels.shape[1], pixels.shape[0])
    if clipped is None or radius <= 0:
        return
    x0, y0, x1, y1 = crop_bounds(clipped)
    size = 2 * radius + 1
    pixels[y0:y1, x0:x1] = ndimage.uniform_filter(
        pixels[y0:y1, x0:x1], size=(size, size, 1), mode="nearest"
    )


def weather_fault_fires(fault: FaultSpec, weather_weight: float) -> bool:
    return weather_weight < fault.deactivation_weight


def apply_weather_tint(
    pixels: np.ndarray,
    fault: FaultSpec,
    weather: str,
    time_of_day: str,
    camera: Camera,
    road_map,
) -> np.ndarray:
    substitute = SUBSTITUTE_WEATHER[weather]
    drift = render_base(substitute, time_of_day, camera, road_map).astype(np.int32) - render_base(
        weather, time_of_day, camera, road_map
    ).astype(np.int32)
    tinted = pixels.astype(np.int32) + np.rint(fault.severity * drift).astype(np.int32)
    return np.clip(tinted, 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# Scene rendering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlacedObject:
    depth: float
    spec: ObjectSpec
    box: BoxPose3D
    polygon: ScreenPolygon


def place_objects(
    specs: Sequence[ObjectSpec],
    camera: Camera,
    frame_index: int,
    faults: FaultIndex,
) -> List[PlacedObject]:
    """Visible objects for one camera and frame, sorted far to near (ties by index)."""
    placed: List[PlacedObject] = []
    for spec in specs:
        box = box_at(spec, frame_index)
        if box is None:
            continue
        if frame_index % 2 == 1 and faults.find("drop_object", spec.index) is not None:
            continue
        polygon = project_box(box, camera)
        if polygon is None:
            continue
        shift = jitter_shift(faults, spec.index, frame_index)
        placed.append(
            PlacedObject(
                depth=camera_depth(box.center, camera),
                spec=spec,
                box=box,
                polygon=polygon.shifted(*shift) if shift != (0.0, 0.0) else polygon,
            )
        )
    placed.sort(key=lambda item: (-item.depth, item.spec.index))
    return placed


def render_frame(
    conditions: ConditionSet,
    camera: Camera,
    view: int,
    frame_index: int,
    seed: int,
    faults: FaultIndex,
) -> Frame:
    conditions_global = conditions.global_conditions
    weather, time_of_day = conditions_global.weather, conditions_global.time_of_day
    road_map = conditions_global.road_map
    height, width = camera.height, camera.width

    pixels = render_base(weather, time_of_day, camera, road_map).astype(float)
    instance_ids = np.zeros((height, width), dtype=np.int32)
    speckle = speckle_field(seed, view, height, width)

    placed = place_objects(conditions.specs, camera, frame_index, faults)
    for item in placed:
        spec = item.spec
        hull_mask = fill_convex(item.polygon.hull, width, height)
        if not hull_mask.any():
            continue
        instance_ids[hull_mask] = spec.index + 1

        wrong_color = wrong_color_fires(faults.find("wrong_color", spec.index), frame_index)
        canvas, covered = render_assembly(
            spec.category,
            rotated_color(spec.color) if wrong_color else spec.color,
            spec.style_tokens,
            item.box,
            camera,
            weather,
            time_of_day,
            speckle,
            jitter_shift(faults, spec.index, frame_index),
        )
        covered &= hull_mask
        pixels[covered] = canvas[covered]

    for item in placed:
        blur = faults.find("blur_object", item.spec.index)
        if blur is not None:
            box_blur(pixels, item.polygon.rect, blur_radius(blur.severity))

    frame_pixels = quantize(pixels)
    for fault in faults.weather:
        if weather_fault_fires(fault, conditions_global.weight("weather")):
            frame_pixels = apply_weather_tint(
                frame_pixels, fault, weather, time_of_day, camera, road_map
            )

    return Frame(pixels=frame_pixels, instance_ids=instance_ids, view=view, frame_index=frame_index)


def posed_cameras(
    conditions: ConditionSet,
    rig: Sequence[Camera],
    num_frames: int,
) -> Tuple[Tuple[Camera, ...], ...]:
    conditions_global = conditions.global_conditions
    return tuple(
        tuple(camera.posed(conditions_global.ego_pose(t)) for t in range(num_frames))
        for camera in rig
    )


def render_scene(
    conditions: ConditionSet,
    rig: Sequence[Camera],
    num_frames: int,
    seed: int,
    fault_plan: Sequence[FaultSpec] = (),
    iteration: int = 0,
) -> MultiviewVideo:
    """Render every (view, frame) cell. Output depends only on the arguments."""
    faults = FaultIndex.build(fault_plan)
    cameras = posed_cameras(conditions, rig, num_frames)
    cells = [(v, t) for v in range(len(rig)) for t in range(num_frames)]

    fired = [
        fault.kind
        for fault in faults.weather
        if weather_fault_fires(fault, conditions.global_conditions.weight("weather"))
    ]
    logger.debug(
        "Rendering %d views x %d frames (iteration %d, global faults firing: %s)",
        len(rig),
        num_frames,
        iteration,
        fired or "none",
    )

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        rendered = list(
            pool.map(
                lambda cell: render_frame(
                    conditions, cameras[cell[0]][cell[1]], cell[0], cell[1], seed, faults
                ),
                cells,
            )
        )

    frames = tuple(
        tuple(rendered[v * num_frames : (v + 1) * num_frames]) for v in range(len(rig))
    )
    return MultiviewVideo(
        frames=frames,
        cameras=cameras,
        seed=seed,
        conditions_fingerprint=conditions.fingerprint(),
        iteration=iteration,
    )
