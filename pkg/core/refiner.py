"""Object-level repair: project the object's 3D box into masks, re-render a
proxy of the requested object and blend it into every view and frame."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from core.condition_encoder import ConditionSet, ObjectEmbedding
from core.config import worker_count
from core.generator import Frame, MultiviewVideo, quantize, render_assembly, speckle_field
from core.geometry import camera_depth, fill_convex, project_box
from core.scene_model import Camera, GlobalConditions, ObjectSpec, box_at
from modules.primitives import COLOR_PALETTE, PrimitiveTemplate, require_category, style_shading


logger = logging.getLogger(__name__)

Cell = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class MaskSequence:
    object_index: int
    masks: Dict[Cell, np.ndarray]  # absent where the box covers no pixel

    def get(self, view: int, frame_index: int) -> Optional[np.ndarray]:
        return self.masks.get((view, frame_index))


@dataclass(frozen=True)
class ProxyPart:
    template: PrimitiveTemplate
    color: Tuple[float, float, float]


@dataclass(frozen=True)
class ProxyMesh:
    object_index: int
    category: str
    color: str
    style_tokens: Tuple[str, ...]
    parts: Tuple[ProxyPart, ...]
    embedding: Tuple[float, ...]  # provenance only

    @property
    def shapes(self) -> Tuple[str, ...]:
        return tuple(part.template.shape for part in self.parts)


@dataclass(frozen=True)
class RefinementRecord:
    object_index: int
    cells: int
    pixels_changed: int

    def to_dict(self) -> Dict[str, int]:
        return {"index": self.object_index, "cells": self.cells, "pixels_changed": self.pixels_changed}


def make_masks(spec: ObjectSpec, cameras: Sequence[Sequence[Camera]]) -> MaskSequence:
    masks: Dict[Cell, np.ndarray] = {}
    for v, row in enumerate(cameras):
        for t, camera in enumerate(row):
            box = box_at(spec, t)
            if box is None:
                continue
            polygon = project_box(box, camera)
            if polygon is None:
                continue
            mask = fill_convex(polygon.hull, camera.width, camera.height)
            if mask.any():
                masks[(v, t)] = mask
    return MaskSequence(object_index=spec.index, masks=masks)


def synthesize_proxy(spec: ObjectSpec, embedding: ObjectEmbedding) -> ProxyMesh:
    templates = require_category(spec.category)
    gain, exponent, _ = style_shading(spec.style_tokens)
    palette = np.asarray(COLOR_PALETTE[spec.color], dtype=float)
    parts = tuple(
        ProxyPart(
            template=template,
            color=tuple(float(c) for c in palette * (template.tone**exponent) * gain),
        )
        for template in templates
    )
    return ProxyMesh(
        object_index=spec.index,
        category=spec.category,
        color=spec.color,
        style_tokens=spec.style_tokens,
        parts=parts,
        embedding=embedding.vector.values,
    )


def render_proxy(
    mesh: ProxyMesh,
    spec: ObjectSpec,
    cameras: Sequence[Sequence[Camera]],
    global_conditions: GlobalConditions,
    seed: int,
) -> Dict[Cell, np.ndarray]:
    """HxWx4 uint8 RGBA per (view, frame); alpha 255 on the silhouette, 0 elsewhere."""
    rasters: Dict[Cell, np.ndarray] = {}
    for v, row in enumerate(cameras):
        for t, camera in enumerate(row):
            rgba = np.zeros((camera.height, camera.width, 4), dtype=np.uint8)
            box = box_at(spec, t)
            polygon = project_box(box, camera) if box is not None else None
            if polygon is not None:
                canvas, covered = render_assembly(
                    mesh.category,
                    mesh.color,
                    mesh.style_tokens,
                    box,
                    camera,
                    global_conditions.weather,
                    global_conditions.time_of_day,
                    speckle_field(seed, v, camera.height, camera.width),
                )
                covered &= fill_convex(polygon.hull, camera.width, camera.height)
                rgba[covered, :3] = quantize(canvas[covered])
                rgba[covered, 3] = 255
            rasters[(v, t)] = rgba
    return rasters


def dilated_mask(mask: np.ndarray, feather_px: int) -> np.ndarray:
    """Pixels within feather_px of the mask; the only pixels compositing may touch."""
    if feather_px == 0 or not mask.any():
        return mask.copy()
    return ndimage.distance_transform_edt(~mask) < feather_px + 1.0


def feather_weights(mask: np.ndarray, feather_px: int) -> np.ndarray:
    """Blend weight of the object layer: 1 on the mask, ramping to 0 over feather_px pixels outside it."""
    if feather_px == 0 or not mask.any():
        return mask.astype(float)
    outside = ndimage.distance_transform_edt(~mask)
    return np.clip(1.0 - outside / (feather_px + 1.0), 0.0, 1.0)


def composite_frame(
    frame: Frame,
    rgba: np.ndarray,
    mask: np.ndarray,
    feather_px: int,
    object_index: int,
    prior: Optional[np.ndarray] = None,
) -> Frame:
    weights = feather_weights(mask, feather_px)
    blend = weights > 0.0
    if not blend.any():
        return frame

    original = frame.pixels.astype(float)
    alpha = rgba[..., 3].astype(float) / 255.0
    others = (frame.instance_ids != 0) & (frame.instance_ids != object_index + 1)
    alpha[others & ~mask] = 0.0
    fallback = original.copy()
    if prior is not None:
        uncovered = mask & (alpha == 0.0) & (frame.instance_ids == 0)
        fallback[uncovered] = prior[uncovered]

    layer = alpha[..., None] * rgba[..., :3].astype(float) + (1.0 - alpha[..., None]) * fallback
    pixels = frame.pixels.copy()
    mixed = weights[blend][:, None] * layer[blend] + (1.0 - weights[blend][:, None]) * original[blend]
    pixels[blend] = quantize(mixed)

    instance_ids = frame.instance_ids.copy()
    instance_ids[(instance_ids == object_index + 1) & ~mask] = 0
    instance_ids[mask] = object_index + 1
    return Frame(pixels=pixels, instance_ids=instance_ids, view=frame.view, frame_index=frame.frame_index)


def composite(
    video: MultiviewVideo,
    proxies: Dict[Cell, np.ndarray],
    masks: MaskSequence,
    feather_px: int,
) -> MultiviewVideo:
    if feather_px < 0:
        raise ValueError(f"feather_px must be non-negative, got {feather_px}")

    def composite_view(view: int) -> List[Frame]:
        refined: List[Frame] = []
        for t, frame in enumerate(video.frames[view]):
            mask = masks.get(view, t)
            if mask is None:
                refined.append(frame)
                continue
            prior = refined[-1].pixels if refined else None
            refined.append(
                composite_frame(frame, proxies[(view, t)], mask, feather_px, masks.object_index, prior)
            )
        return refined

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        frames = list(pool.map(composite_view, range(video.num_views)))
    return video.replace_frames(frames, refined_objects=(masks.object_index,))


def occluders(
    spec: ObjectSpec,
    others: Sequence[ObjectSpec],
    camera: Camera,
    frame_index: int,
) -> List[int]:
    """Instance ids of objects whose box center is nearer to the camera than this object's."""
    box = box_at(spec, frame_index)
    if box is None:
        return []
    depth = camera_depth(box.center, camera)
    nearer = []
    for other in others:
        if other.index == spec.index:
            continue
        other_box = box_at(other, frame_index)
        if other_box is None:
            continue
        other_depth = camera_depth(other_box.center, camera)
        if other_depth > camera.near and (other_depth, other.index) < (depth, spec.index):
            nearer.append(other.index + 1)
    return nearer


def unoccluded_masks(
    masks: MaskSequence,
    video: MultiviewVideo,
    spec: ObjectSpec,
    others: Sequence[ObjectSpec],
) -> MaskSequence:
    trimmed: Dict[Cell, np.ndarray] = {}
    for (v, t), mask in masks.masks.items():
        blocked = occluders(spec, others, video.camera(v, t), t)
        if blocked:
            mask = mask & ~np.isin(video.frame(v, t).instance_ids, blocked)
        trimmed[(v, t)] = mask
    return MaskSequence(object_index=masks.object_index, masks=trimmed)


def refine_object(
    video: MultiviewVideo,
    conditions: ConditionSet,
    index: int,
    feather_px: int,
) -> Tuple[MultiviewVideo, RefinementRecord, MaskSequence]:
    spec = conditions.spec_for(index)
    mesh = synthesize_proxy(spec, conditions.embedding_for(index))
    masks = unoccluded_masks(make_masks(spec, video.cameras), video, spec, conditions.specs)
    proxies = render_proxy(mesh, spec, video.cameras, conditions.global_conditions, video.seed)
    refined = composite(video, proxies, masks, feather_px)

    changed = sum(
        int(np.any(before.pixels != after.pixels, axis=-1).sum())
        for (_, _, before), (_, _, after) in zip(video.cells(), refined.cells())
    )
    record = RefinementRecord(object_index=index, cells=len(masks.masks), pixels_changed=changed)
    logger.info(
        "Refined object %d across %d cells (%d pixels changed)", index, record.cells, changed
    )
    return refined, record, masks
