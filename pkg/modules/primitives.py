from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

from core.validation import VocabularyError


RGB = Tuple[float, float, float]
Vec3 = Tuple[float, float, float]


COLOR_PALETTE: Dict[str, RGB] = {
    "white": (235.0, 235.0, 235.0),
    "black": (35.0, 35.0, 38.0),
    "red": (200.0, 30.0, 35.0),
    "blue": (30.0, 60.0, 200.0),
    "silver": (170.0, 172.0, 176.0),
    "yellow": (230.0, 200.0, 30.0),
    "green": (40.0, 160.0, 60.0),
}

# Chromatic wheel order; achromatic colors enter the wheel at a fixed slot.
COLOR_WHEEL: Tuple[str, ...] = ("red", "yellow", "green", "blue")
WHEEL_ENTRY: Dict[str, str] = {"white": "green", "silver": "yellow", "black": "red"}
WHEEL_ROTATION = 2


@dataclass(frozen=True)
class PrimitiveTemplate:
    """One part of a category silhouette, in units of the object's (l, w, h)."""

    shape: str  # box | cylinder | capsule
    center: Vec3 = (0.0, 0.0, 0.0)
    extent: Vec3 = (1.0, 1.0, 1.0)  # box size
    start: Vec3 = (0.0, 0.0, 0.0)  # cylinder / capsule axis
    end: Vec3 = (0.0, 0.0, 0.0)
    radius: float = 0.0  # fraction of min(w, h)
    tone: float = 1.0


# Drawn in table order: bodies first, details on top.
CATEGORY_PRIMITIVES: Dict[str, Tuple[PrimitiveTemplate, ...]] = {
    "car": (
        PrimitiveTemplate("box", center=(0.0, 0.0, -0.2), extent=(1.0, 1.0, 0.6)),
        PrimitiveTemplate("box", center=(-0.05, 0.0, 0.3), extent=(0.55, 0.9, 0.4), tone=0.6),
    ),
    "bus": (
        PrimitiveTemplate("box", center=(0.0, 0.0, -0.075), extent=(1.0, 1.0, 0.85)),
        PrimitiveTemplate("box", center=(0.0, 0.0, 0.425), extent=(0.9, 0.95, 0.15), tone=0.55),
    ),
    "truck": (
        PrimitiveTemplate("box", center=(-0.15, 0.0, 0.0), extent=(0.7, 1.0, 1.0)),
        PrimitiveTemplate("box", center=(0.35, 0.0, -0.1), extent=(0.3, 1.0, 0.8), tone=0.7),
    ),
    "construction_vehicle": (
        PrimitiveTemplate("box", center=(0.0, 0.0, -0.2), extent=(1.0, 1.0, 0.6)),
        PrimitiveTemplate("box", center=(-0.25, 0.0, 0.3), extent=(0.3, 0.6, 0.4), tone=0.6),
        PrimitiveTemplate(
            "cylinder", start=(0.1, 0.0, 0.05), end=(0.45, 0.0, 0.4), radius=0.12, tone=0.8
        ),
    ),
    "pedestrian": (
        PrimitiveTemplate("capsule", start=(0.0, 0.0, -0.3), end=(0.0, 0.0, 0.3), radius=0.35),
    ),
    "trailer": (
        PrimitiveTemplate("box", center=(0.0, 0.0, 0.1), extent=(1.0, 1.0, 0.8)),
        PrimitiveTemplate("box", center=(0.0, 0.0, -0.4), extent=(0.9, 0.8, 0.2), tone=0.4),
    ),
}

# Style tokens shade the whole assembly: (gain, tone exponent, speckle depth).
STYLE_SHADING: Dict[str, Tuple[float, float, float]] = {
    "clean": (1.0, 1.0, 0.0),
    "dirty": (0.85, 1.0, 0.2),
    "modern": (1.1, 1.0, 0.0),
    "boxy": (1.0, 1.5, 0.0),
    "long": (1.0, 1.0, 0.0),
}


def require_category(category: str) -> Tuple[PrimitiveTemplate, ...]:
    try:
        return CATEGORY_PRIMITIVES[category]
    except KeyError:
        raise VocabularyError(f"Unknown category token '{category}'") from None


def rotated_color(color: str) -> str:
    anchor = WHEEL_ENTRY.get(color, color)
    if anchor not in COLOR_WHEEL:
        raise VocabularyError(f"Unknown color token '{color}'")
    position = COLOR_WHEEL.index(anchor)
    return COLOR_WHEEL[(position + WHEEL_ROTATION) % len(COLOR_WHEEL)]


def style_shading(style_tokens: Iterable[str]) -> Tuple[float, float, float]:
    gain, exponent, speckle = 1.0, 1.0, 0.0
    for token in sorted(set(style_tokens)):
        token_gain, token_exponent, token_speckle = STYLE_SHADING[token]
        gain *= token_gain
        exponent *= token_exponent
        speckle = max(speckle, token_speckle)
    return gain, exponent, speckle
