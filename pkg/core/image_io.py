from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image

from core.validation import DomainError, ScenarioSyntaxError


FLOAT_SIGNIFICANT_DIGITS = 9
GRAY_MODES = ("L", "I", "I;16", "I;16B")


def _round_floats(value: Any) -> Any:
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if not math.isfinite(number):
            return None
        return float(f"{number:.{FLOAT_SIGNIFICANT_DIGITS}g}")
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, dict):
        return {str(key): _round_floats(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round_floats(item) for item in value]
    return value


def dumps_deterministic(payload: Any) -> str:
    """Sorted keys and 9-significant-digit floats, so equal runs give equal bytes."""
    return json.dumps(_round_floats(payload), sort_keys=True, indent=2) + "\n"


def write_json(path: Path, payload: Any) -> None:
    path.write_text(dumps_deterministic(payload), encoding="utf-8")


def write_ppm(path: Path, pixels: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8)).save(path, format="PPM")


def read_rgb(path: Path) -> np.ndarray:
    with Image.open(path) as image:
        pixels = np.asarray(image.convert("RGB"), dtype=np.uint8)
    if pixels.size == 0:
        raise DomainError(f"Image has no pixels: {path}")
    return pixels


def write_pgm16(path: Path, values: np.ndarray) -> None:
    """Instance ids as a 16-bit binary PGM (maxval 65535)."""
    Image.fromarray(np.ascontiguousarray(values, dtype=np.int32)).save(path, format="PPM")


def write_pgm8(path: Path, values: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(values, dtype=np.uint8)).save(path, format="PPM")


def read_pgm(path: Path) -> np.ndarray:
    with Image.open(path) as image:
        if image.mode not in GRAY_MODES:
            raise ScenarioSyntaxError(f"Expected a grayscale PGM, got mode {image.mode}: {path}")
        return np.asarray(image).astype(np.int32)
