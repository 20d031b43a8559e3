from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np

from core.config import ENCODER_CONFIG, EncoderConfig
from core.scene_model import BoxPose3D, GlobalConditions, ObjectSpec, Scenario, SceneBounds, box_at
from core.validation import ContractError, DomainError, axis_outside
from modules.primitives import COLOR_PALETTE
from modules.vocabulary import object_token_indices


logger = logging.getLogger(__name__)

FEATURE_TAGS = ("geo", "txt", "vis", "fused", "scene")
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
HUE_BINS = 8
GRID_CELLS = 4


@dataclass(frozen=True)
class FeatureVector:
    values: Tuple[float, ...]
    tag: str

    def __post_init__(self) -> None:
        if self.tag not in FEATURE_TAGS:
            raise ContractError(f"Unknown feature tag: {self.tag}")
        if not all(math.isfinite(value) for value in self.values):
            raise ContractError(f"Non-finite component in {self.tag} feature")

    @classmethod
    def of(cls, values: Sequence[float] | np.ndarray, tag: str) -> "FeatureVector":
        return cls(values=tuple(float(v) for v in np.asarray(values, dtype=float).ravel()), tag=tag)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ObjectEmbedding:
    object_index: int
    vector: FeatureVector
    identity_code: FeatureVector


@dataclass(frozen=True)
class ConditionSet:
    global_conditions: GlobalConditions
    locals: Tuple[ObjectEmbedding, ...]
    specs: Tuple[ObjectSpec, ...]
    scene_bounds: SceneBounds

    def embedding_for(self, index: int) -> ObjectEmbedding:
        for embedding in self.locals:
            if embedding.object_index == index:
                return embedding
        raise ContractError(f"No embedding for object index {index}")

    def spec_for(self, index: int) -> ObjectSpec:
        for spec in self.specs:
            if spec.index == index:
                return spec
        raise ContractError(f"No object with index {index}")

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        conditions = self.global_conditions
        digest.update(repr((conditions.weather, conditions.time_of_day)).encode())
        digest.update(repr(conditions.emphasis_weights).encode())
        digest.update(repr(conditions.ego_trajectory).encode())
        digest.update(repr(conditions.road_map).encode())
        for embedding in self.locals:
            digest.update(str(embedding.object_index).encode())
            digest.update(np.asarray(embedding.vector.values, dtype="<f8").tobytes())
        for spec in self.specs:
            digest.update(repr((spec.category, spec.color, spec.style_tokens, spec.keyframes)).encode())
        return digest.hexdigest()


def _expected_length(tag: str, config: EncoderConfig) -> int:
    return {
        "geo": config.d_geo,
        "txt": config.d_tok,
        "vis": config.d_vis,
        "fused": config.d_e,
    }[tag]


def _require_feature(feature: FeatureVector, tag: str, config: EncoderConfig) -> np.ndarray:
    if feature.tag != tag:
        raise ContractError(f"Expected a {tag} feature, got {feature.tag}")
    expected = _expected_length(tag, config)
    if len(feature) != expected:
        raise ContractError(f"{tag} feature has length {len(feature)}, expected {expected}")
    return feature.array()


def normalized_box(box: BoxPose3D, bounds: SceneBounds) -> np.ndarray:
    axis = axis_outside(box.center, bounds.min, bounds.max)
    if axis is not None:
        raise DomainError(f"Box center outside scene bounds on axis {axis}")

    low = np.asarray(bounds.min, dtype=float)
    span = np.asarray(bounds.max, dtype=float) - low
    center = (np.asarray(box.center, dtype=float) - low) / span
    size = np.clip(np.asarray(box.size, dtype=float) / span, 0.0, 1.0)
    yaw = (box.yaw + math.pi) / (2.0 * math.pi)
    return np.concatenate([center, size, [yaw]])


def fourier_encode_box(
    box: BoxPose3D,
    bounds: SceneBounds,
    k_freq: int = ENCODER_CONFIG.k_freq,
) -> FeatureVector:
    if k_freq < 1:
        raise ContractError(f"K_freq must be at least 1, got {k_freq}")

    b = normalized_box(box, bounds)
    values: List[float] = []
    for k in range(k_freq):
        scale = (2.0**k) * math.pi
        for component in b:
            values.append(math.sin(scale * component))
            values.append(math.cos(scale * component))
    return FeatureVector.of(values, "geo")


def embed_text(
    category: str,
    color: str,
    style_tokens: Sequence[str],
    config: EncoderConfig = ENCODER_CONFIG,
) -> FeatureVector:
    vector = np.zeros(config.d_tok)
    indices = object_token_indices(category, color, style_tokens)
    vector[indices] = 1.0
    return FeatureVector.of(vector / math.sqrt(len(indices)), "txt")


def _unit(block: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(block))
    return block / norm if norm > 0.0 else block


def _grid_edges(length: int) -> List[Tuple[int, int]]:
    edges = []
    for cell in range(GRID_CELLS):
        start = min(cell * length // GRID_CELLS, length - 1)
        end = max((cell + 1) * length // GRID_CELLS, start + 1)
        edges.append((start, end))
    return edges


def hue_histogram(rgb: np.ndarray) -> np.ndarray:
    """8-bin hue counts over chromatic pixels; achromatic pixels carry no hue."""
    flat = rgb.reshape(-1, 3)
    high = flat.max(axis=1)
    low = flat.min(axis=1)
    chroma = high - low
    chromatic = chroma > 0.0
    r, g, b = flat[chromatic].T
    c = chroma[chromatic]
    peak = high[chromatic]

    hue = np.zeros(c.shape)
    red_peak = peak == r
    green_peak = ~red_peak & (peak == g)
    blue_peak = ~red_peak & ~green_peak
    hue[red_peak] = np.mod((g[red_peak] - b[red_peak]) / c[red_peak], 6.0)
    hue[green_peak] = (b[green_peak] - r[green_peak]) / c[green_peak] + 2.0
    hue[blue_peak] = (r[blue_peak] - g[blue_peak]) / c[blue_peak] + 4.0

    bins = np.minimum((hue / 6.0 * HUE_BINS).astype(int), HUE_BINS - 1)
    return np.bincount(bins, minlength=HUE_BINS).astype(float)


def appearance_array(image: np.ndarray) -> np.ndarray:
    pixels = np.asarray(image)
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.shape[0] == 0 or pixels.shape[1] == 0:
        raise DomainError("Appearance embedding needs a non-empty HxWx3 image")
    rgb = pixels.astype(float) / 255.0 if pixels.dtype == np.uint8 else pixels.astype(float)

    mean_rgb = rgb.reshape(-1, 3).mean(axis=0)
    luminance = rgb @ LUMA_WEIGHTS
    grid = np.array(
        [
            luminance[r0:r1, c0:c1].mean()
            for r0, r1 in _grid_edges(luminance.shape[0])
            for c0, c1 in _grid_edges(luminance.shape[1])
        ]
    )
    return np.concatenate([_unit(mean_rgb), _unit(grid), _unit(hue_histogram(rgb))])


def embed_appearance(image: np.ndarray) -> FeatureVector:
    """27-dim feature: mean RGB | 4x4 luminance grid | 8-bin hue histogram, each unit norm."""
    return FeatureVector.of(appearance_array(image), "vis")


@lru_cache(maxsize=4)
def fusion_matrix(config: EncoderConfig = ENCODER_CONFIG) -> np.ndarray:
    fan_in = config.fusion_fan_in
    bound = 1.0 / math.sqrt(fan_in)
    rng = np.random.default_rng(config.fusion_seed)
    matrix = rng.uniform(-bound, bound, size=(config.d_e, fan_in))
    matrix.setflags(write=False)
    return matrix


def identity_code(object_index: int, config: EncoderConfig = ENCODER_CONFIG) -> FeatureVector:
    code = np.zeros(config.d_e)
    for d in range(config.d_e // 2):
        angle = object_index / (10000.0 ** (2.0 * d / config.d_e))
        code[2 * d] = math.sin(angle)
        code[2 * d + 1] = math.cos(angle)
    return FeatureVector.of(code, "fused")


def _fixed_order_matvec(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    # math.fsum is correctly rounded, so the result does not depend on BLAS or platform.
    return np.array(
        [math.fsum(float(w) * float(x) for w, x in zip(row, vector)) for row in matrix]
    )


def fuse_object_embedding(
    f_geo: FeatureVector,
    f_txt: FeatureVector,
    f_vis: FeatureVector,
    object_index: int,
    config: EncoderConfig = ENCODER_CONFIG,
) -> ObjectEmbedding:
    joined = np.concatenate(
        [
            _require_feature(f_geo, "geo", config),
            _require_feature(f_txt, "txt", config),
            _require_feature(f_vis, "vis", config),
        ]
    )
    code = identity_code(object_index, config)
    fused = np.tanh(_fixed_order_matvec(fusion_matrix(config), joined)) + code.array()
    return ObjectEmbedding(
        object_index=object_index,
        vector=FeatureVector.of(fused, "fused"),
        identity_code=code,
    )


def object_appearance(spec: ObjectSpec) -> FeatureVector:
    if spec.reference_appearance is not None:
        return embed_appearance(spec.reference_appearance)
    # Without a reference image the visual stream sees a swatch of the requested color.
    swatch = np.tile(np.array(COLOR_PALETTE[spec.color], dtype=float) / 255.0, (8, 8, 1))
    return embed_appearance(swatch)


NEUTRAL_COLOR = "silver"


def global_only(scenario: Scenario) -> Scenario:
    """Same layout with every object stripped to a category-neutral color and no style."""
    objects = tuple(
        replace(spec, color=NEUTRAL_COLOR, style_tokens=(), reference_path=None, reference_appearance=None)
        for spec in scenario.objects
    )
    return replace(scenario, objects=objects)


def build_conditions(scenario: Scenario, global_conditions: GlobalConditions | None = None) -> ConditionSet:
    conditions = global_conditions or scenario.global_conditions
    specs = tuple(sorted(scenario.objects, key=lambda spec: spec.index))
    embeddings = []
    for spec in specs:
        mid_box = box_at(spec, spec.mid_frame())
        if mid_box is None:
            raise ContractError(f"Object {spec.index} has no box at its mid frame")
        embedding = fuse_object_embedding(
            fourier_encode_box(mid_box, scenario.scene_bounds),
            embed_text(spec.category, spec.color, spec.style_tokens),
            object_appearance(spec),
            spec.index,
        )
        embeddings.append(embedding)

    logger.debug("Built %d object embeddings", len(embeddings))
    return ConditionSet(
        global_conditions=conditions,
        locals=tuple(embeddings),
        specs=specs,
        scene_bounds=scenario.scene_bounds,
    )
