from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, ndimage

from core.condition_encoder import (
    LUMA_WEIGHTS,
    ConditionSet,
    ObjectEmbedding,
    appearance_array,
)
from core.config import ENCODER_CONFIG, MIN_CROP_AREA, EncoderConfig, worker_count
from core.generator import MultiviewVideo, quantize, render_assembly, render_base, speckle_field
from core.geometry import clip_rect, crop_bounds, fill_convex, project_box, rect_area
from core.scene_model import BoxPose3D, Camera, GlobalConditions, ObjectSpec, box_at
from core.validation import ContractError
from modules.signatures import MACRO_TAU
from modules.vocabulary import GLOBAL_ATTRIBUTES, VOCABULARIES


logger = logging.getLogger(__name__)

MACRO_VIEW = 0
STATUS_SCORED = "scored"
STATUS_UNOBSERVABLE = "unobservable"
STATUS_INSUFFICIENT = "insufficient observations"

Window = Tuple[int, int, int, int]


@dataclass(frozen=True, eq=False)
class Crop:
    view: int
    frame_index: int
    window: Window  # (x0, y0, x1, y1) in source-frame pixels
    pixels: np.ndarray


@dataclass(frozen=True, eq=False)
class ObjectBatch:
    object_index: int
    crops: Tuple[Crop, ...]

    def __len__(self) -> int:
        return len(self.crops)

    @property
    def provenance(self) -> List[Tuple[int, int]]:
        return [(crop.view, crop.frame_index) for crop in self.crops]


@dataclass(frozen=True)
class ObjectScore:
    index: int
    status: str
    s_obj: Optional[float] = None
    semantic: Optional[float] = None
    clarity: Optional[float] = None
    index_consistency: Optional[float] = None
    consistency_status: str = STATUS_SCORED
    crop_count: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "status": self.status,
            "s_obj": self.s_obj,
            "semantic": self.semantic,
            "clarity": self.clarity,
            "index_consistency": self.index_consistency,
            "index_consistency_status": self.consistency_status,
            "crops": self.crop_count,
        }


@dataclass(frozen=True)
class AssessmentReport:
    s_macro: float
    per_attribute_macro: Dict[str, float]
    per_frame_macro: Dict[str, Tuple[float, ...]]
    object_scores: Dict[int, ObjectScore]
    lam: float
    thresholds: Dict[str, float] = field(default_factory=dict)

    @property
    def index_consistency(self) -> Dict[int, Optional[float]]:
        return {index: score.index_consistency for index, score in self.object_scores.items()}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "s_macro": self.s_macro,
            "per_attribute_macro": dict(self.per_attribute_macro),
            "objects": [self.object_scores[index].to_dict() for index in sorted(self.object_scores)],
            "thresholds": dict(self.thresholds),
            "lambda": self.lam,
        }


# ---------------------------------------------------------------------------
# Macro assessment
# ---------------------------------------------------------------------------


def _region_mean(pixels: np.ndarray, mask: np.ndarray) -> np.ndarray:
    if not mask.any():
        return np.zeros(3)
    return pixels[mask].mean(axis=0) / 255.0


def scene_statistics(pixels: np.ndarray, background: np.ndarray) -> np.ndarray:
    """Top-quarter mean color, bottom-quarter mean color and luminance spread of background pixels."""
    height = pixels.shape[0]
    band = max(height // 4, 1)
    rgb = pixels.astype(float)

    top = np.zeros_like(background)
    top[:band] = background[:band]
    bottom = np.zeros_like(background)
    bottom[height - band :] = background[height - band :]

    if background.any():
        spread = float((rgb[background] @ LUMA_WEIGHTS).std() / 255.0)
    else:
        spread = 0.0
    return np.concatenate([_region_mean(rgb, top), _region_mean(rgb, bottom), [spread]])


def _candidates(attribute: str, global_conditions: GlobalConditions) -> List[Tuple[str, str]]:
    if attribute == "weather":
        return [(global_conditions.weather, time) for time in VOCABULARIES["time_of_day"]]
    return [(weather, global_conditions.time_of_day) for weather in VOCABULARIES["weather"]]


def _attribute_score(distance: float) -> float:
    return max(0.0, 1.0 - distance / MACRO_TAU)


def assess_macro(
    video: MultiviewVideo,
    global_conditions: GlobalConditions,
) -> Tuple[float, Dict[str, float], Dict[str, Tuple[float, ...]]]:
    """Scene-level consistency of the front view with the claimed weather and time.

    Observed statistics are compared with re-rendered empty scenes on the same
    background pixels. The weather score lets time vary freely and vice versa,
    so each attribute is judged on its own.
    """
    road_map = global_conditions.road_map
    observed: List[np.ndarray] = []
    references: Dict[Tuple[str, str], List[np.ndarray]] = {}
    wanted = {pair for attribute in GLOBAL_ATTRIBUTES for pair in _candidates(attribute, global_conditions)}

    for t in range(video.num_frames):
        frame = video.frame(MACRO_VIEW, t)
        camera = video.camera(MACRO_VIEW, t)
        background = frame.instance_ids == 0
        observed.append(scene_statistics(frame.pixels, background))
        for weather, time_of_day in wanted:
            base = render_base(weather, time_of_day, camera, road_map)
            references.setdefault((weather, time_of_day), []).append(
                scene_statistics(base, background)
            )

    per_attribute: Dict[str, float] = {}
    per_frame: Dict[str, Tuple[float, ...]] = {}
    mean_observed = np.mean(observed, axis=0)
    for attribute in GLOBAL_ATTRIBUTES:
        pairs = _candidates(attribute, global_conditions)
        distance = min(
            float(np.linalg.norm(mean_observed - np.mean(references[pair], axis=0))) for pair in pairs
        )
        per_attribute[attribute] = _attribute_score(distance)
        per_frame[attribute] = tuple(
            _attribute_score(
                min(float(np.linalg.norm(observed[t] - references[pair][t])) for pair in pairs)
            )
            for t in range(video.num_frames)
        )

    s_macro = sum(per_attribute.values()) / len(per_attribute)
    return s_macro, per_attribute, per_frame


# ---------------------------------------------------------------------------
# Object batches
# ---------------------------------------------------------------------------


def crop_window(box: BoxPose3D, camera: Camera) -> Optional[Window]:
    polygon = project_box(box, camera)
    if polygon is None:
        return None
    clipped = clip_rect(polygon.rect, camera.width, camera.height)
    if rect_area(clipped) < MIN_CROP_AREA:
        return None
    x0, y0, x1, y1 = crop_bounds(clipped)
    return (x0, y0, min(x1, camera.width), min(y1, camera.height))


def visible_windows(
    spec: ObjectSpec,
    cameras: Sequence[Sequence[Camera]],
) -> List[Tuple[int, int, BoxPose3D, Window]]:
    windows = []
    for v, row in enumerate(cameras):
        for t, camera in enumerate(row):
            box = box_at(spec, t)
            if box is None:
                continue
            window = crop_window(box, camera)
            if window is not None:
                windows.append((v, t, box, window))
    return windows


def _cut(pixels: np.ndarray, window: Window) -> np.ndarray:
    x0, y0, x1, y1 = window
    return pixels[y0:y1, x0:x1]


def crop_object_batch(
    video: MultiviewVideo,
    spec: ObjectSpec,
    cameras: Optional[Sequence[Sequence[Camera]]] = None,
) -> ObjectBatch:
    grid = cameras if cameras is not None else video.cameras
    crops = tuple(
        Crop(view=v, frame_index=t, window=window, pixels=_cut(video.frame(v, t).pixels, window))
        for v, t, _, window in visible_windows(spec, grid)
    )
    return ObjectBatch(object_index=spec.index, crops=crops)


# ---------------------------------------------------------------------------
# Scores
# ---------------------------------------------------------------------------


def laplacian_variance(pixels: np.ndarray) -> float:
    luminance = (pixels.astype(float) / 255.0) @ LUMA_WEIGHTS
    return float(ndimage.laplace(luminance, mode="reflect").var())


def clarity_score(batch: ObjectBatch) -> Tuple[float, ...]:
    if not batch.crops:
        raise ContractError(f"Clarity needs at least one crop for object {batch.object_index}")
    raw = np.array([laplacian_variance(crop.pixels) for crop in batch.crops])
    low, high = float(raw.min()), float(raw.max())
    if high == low:
        return tuple(1.0 for _ in batch.crops)
    return tuple(float(q) for q in (raw - low) / (high - low))


def batch_features(batch: ObjectBatch) -> np.ndarray:
    return np.array([appearance_array(crop.pixels) for crop in batch.crops])


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    norm = float(np.linalg.norm(a) * np.linalg.norm(b))
    if norm == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / norm, -1.0, 1.0))


def object_score(semantic: float, clarity: float, lam: float) -> float:
    return lam * semantic + (1.0 - lam) * clarity


def block_centering(blocks: Sequence[int]) -> np.ndarray:
    """Projector removing the constant direction of each feature block.

    A flat luminance grid or a gray mean color maps to zero; only deviations
    from the block mean reach the shared space.
    """
    parts = [np.eye(size) - np.full((size, size), 1.0 / size) for size in blocks]
    return linalg.block_diag(*parts)


@dataclass(frozen=True, eq=False)
class ProjectionHeads:
    """Linear maps of visual features and object embeddings into one shared space."""

    visual: np.ndarray  # shared_dim x d_vis
    condition: np.ndarray  # shared_dim x d_e

    @classmethod
    def seeded(cls, config: EncoderConfig = ENCODER_CONFIG) -> "ProjectionHeads":
        gaussian = np.random.default_rng(config.visual_head_seed).standard_normal(
            (config.shared_dim, config.d_vis)
        )
        basis, _ = np.linalg.qr(gaussian)
        visual = basis @ block_centering(config.feature_blocks)
        bound = 1.0 / math.sqrt(config.d_e)
        condition = np.random.default_rng(config.condition_head_seed).uniform(
            -bound, bound, size=(config.shared_dim, config.d_e)
        )
        return cls(visual=visual, condition=condition)

    def calibrated(self, embeddings: np.ndarray, targets: np.ndarray) -> "ProjectionHeads":
        """Minimum-norm update so each embedding row projects onto the visual image of its target row."""
        e = np.asarray(embeddings, dtype=float).T
        y = self.visual @ np.asarray(targets, dtype=float).T
        correction = (y - self.condition @ e) @ np.linalg.pinv(e)
        return ProjectionHeads(visual=self.visual, condition=self.condition + correction)

    def project_visual(self, feature: np.ndarray) -> np.ndarray:
        return self.visual @ np.asarray(feature, dtype=float)

    def project_condition(self, embedding: np.ndarray) -> np.ndarray:
        return self.condition @ np.asarray(embedding, dtype=float)

    def semantic(self, embedding: ObjectEmbedding, visual_feature: np.ndarray) -> float:
        return cosine(
            self.project_condition(embedding.vector.array()), self.project_visual(visual_feature)
        )


def expected_appearance(
    global_conditions: GlobalConditions,
    spec: ObjectSpec,
    cameras: Sequence[Sequence[Camera]],
    seed: int,
) -> Optional[np.ndarray]:
    """Mean appearance feature of the object drawn alone, fault-free, in every visible crop."""
    features = []
    for v, t, box, window in visible_windows(spec, cameras):
        camera = cameras[v][t]
        pixels = render_base(
            global_conditions.weather, global_conditions.time_of_day, camera, global_conditions.road_map
        ).astype(float)
        canvas, covered = render_assembly(
            spec.category,
            spec.color,
            spec.style_tokens,
            box,
            camera,
            global_conditions.weather,
            global_conditions.time_of_day,
            speckle_field(seed, v, camera.height, camera.width),
        )
        polygon = project_box(box, camera)
        covered &= fill_convex(polygon.hull, camera.width, camera.height)
        pixels[covered] = canvas[covered]
        features.append(appearance_array(_cut(quantize(pixels), window)))
    if not features:
        return None
    return np.mean(features, axis=0)


@lru_cache(maxsize=16)
def calibrate_heads(
    conditions: ConditionSet,
    cameras: Tuple[Tuple[Camera, ...], ...],
    seed: int,
) -> ProjectionHeads:
    heads = ProjectionHeads.seeded()
    embeddings, targets = [], []
    for spec in conditions.specs:
        target = expected_appearance(conditions.global_conditions, spec, cameras, seed)
        if target is None:
            continue
        embeddings.append(conditions.embedding_for(spec.index).vector.array())
        targets.append(target)
    if not embeddings:
        return heads
    logger.debug("Calibrated condition head on %d visible objects", len(embeddings))
    return heads.calibrated(np.array(embeddings), np.array(targets))


def assess_object(
    batch: ObjectBatch,
    embedding: ObjectEmbedding,
    lam: float,
    heads: ProjectionHeads,
) -> ObjectScore:
    if not 0.0 < lam < 1.0:
        raise ContractError(f"lambda must lie in (0, 1), got {lam}")
    if not batch.crops:
        return ObjectScore(index=batch.object_index, status=STATUS_UNOBSERVABLE)

    features = batch_features(batch)
    semantic = heads.semantic(embedding, features.mean(axis=0))
    clarity = float(np.mean(clarity_score(batch)))
    consistency, consistency_status = _pairwise_consistency(features)
    return ObjectScore(
        index=batch.object_index,
        status=STATUS_SCORED,
        s_obj=object_score(semantic, clarity, lam),
        semantic=semantic,
        clarity=clarity,
        index_consistency=consistency,
        consistency_status=consistency_status,
        crop_count=len(batch.crops),
    )


def _pairwise_consistency(features: np.ndarray) -> Tuple[Optional[float], str]:
    if len(features) < 2:
        return None, STATUS_INSUFFICIENT
    values = [cosine(features[i], features[j]) for i, j in combinations(range(len(features)), 2)]
    return float(np.mean(values)), STATUS_SCORED


def index_consistency(video: MultiviewVideo, spec: ObjectSpec) -> Tuple[Optional[float], str]:
    batch = crop_object_batch(video, spec)
    if len(batch) < 2:
        return None, STATUS_INSUFFICIENT
    return _pairwise_consistency(batch_features(batch))


def evaluate_video(
    video: MultiviewVideo,
    conditions: ConditionSet,
    lam: float,
    thresholds: Optional[Dict[str, float]] = None,
) -> AssessmentReport:
    s_macro, per_attribute, per_frame = assess_macro(video, conditions.global_conditions)
    heads = calibrate_heads(conditions, video.cameras, video.seed)

    def score(spec: ObjectSpec) -> ObjectScore:
        return assess_object(
            crop_object_batch(video, spec), conditions.embedding_for(spec.index), lam, heads
        )

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        scores = list(pool.map(score, conditions.specs))

    for item in scores:
        if item.status == STATUS_SCORED:
            logger.debug(
                "Object %d: s_obj=%.3f semantic=%.3f clarity=%.3f",
                item.index,
                item.s_obj,
                item.semantic,
                item.clarity,
            )
        else:
            logger.debug("Object %d: %s", item.index, item.status)

    return AssessmentReport(
        s_macro=s_macro,
        per_attribute_macro=per_attribute,
        per_frame_macro=per_frame,
        object_scores={item.index: item for item in scores},
        lam=lam,
        thresholds=dict(thresholds or {}),
    )


def with_category(spec: ObjectSpec, category: str) -> ObjectSpec:
    return replace(spec, category=category)
