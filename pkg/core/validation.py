from __future__ import annotations

import math
from typing import Iterable, Sequence


ORTHONORMAL_TOLERANCE = 1e-9


class ScenarioValidationError(ValueError):
    """Raised when a scenario, its conditions, or a caller contract is invalid."""


class ScenarioSyntaxError(ScenarioValidationError):
    """Malformed scenario text; the message carries the position or JSON path."""


class ScenarioSemanticError(ScenarioValidationError):
    """Well-formed scenario that breaks an invariant; the message names the field."""


class VocabularyError(ScenarioValidationError):
    """A token outside the built-in vocabularies."""


class DomainError(ScenarioValidationError):
    """A value outside the mathematical domain of an operation."""


class ContractError(ScenarioValidationError):
    """A caller broke an operation's precondition."""


class ConfigError(ScenarioValidationError):
    """Invalid loop configuration, flag, or environment override."""


def all_finite(values: Iterable[float]) -> bool:
    return all(math.isfinite(float(value)) for value in values)


def is_orthonormal(rotation: Sequence[float], tolerance: float = ORTHONORMAL_TOLERANCE) -> bool:
    """Row-major 3x3 rotation check: R R^T = I and det(R) = +1."""
    if len(rotation) != 9 or not all_finite(rotation):
        return False

    rows = [rotation[0:3], rotation[3:6], rotation[6:9]]
    for i in range(3):
        for j in range(3):
            dot = sum(rows[i][k] * rows[j][k] for k in range(3))
            expected = 1.0 if i == j else 0.0
            if abs(dot - expected) > tolerance:
                return False

    (a, b, c), (d, e, f), (g, h, i) = rows
    determinant = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    return abs(determinant - 1.0) <= tolerance


def axis_outside(
    point: Sequence[float],
    lower: Sequence[float],
    upper: Sequence[float],
) -> str | None:
    """Name of the first axis on which the point leaves [lower, upper], else None."""
    for axis, value, low, high in zip("xyz", point, lower, upper):
        if not low <= value <= high:
            return axis
    return None
