from __future__ import annotations

from typing import Dict, Iterable, List, Tuple

from core.validation import VocabularyError


WEATHER_TOKENS: Tuple[str, ...] = ("sunny", "rain", "fog", "snow")
TIME_TOKENS: Tuple[str, ...] = ("day", "dusk", "night")
CATEGORY_TOKENS: Tuple[str, ...] = (
    "car",
    "bus",
    "truck",
    "construction_vehicle",
    "pedestrian",
    "trailer",
)
COLOR_TOKENS: Tuple[str, ...] = ("white", "black", "red", "blue", "silver", "yellow", "green")
STYLE_TOKENS: Tuple[str, ...] = ("clean", "dirty", "modern", "boxy", "long")

VOCABULARIES: Dict[str, Tuple[str, ...]] = {
    "weather": WEATHER_TOKENS,
    "time_of_day": TIME_TOKENS,
    "category": CATEGORY_TOKENS,
    "color": COLOR_TOKENS,
    "style": STYLE_TOKENS,
}

# Emphasis weights exist for the global attributes only.
GLOBAL_ATTRIBUTES: Tuple[str, ...] = ("weather", "time_of_day")


def _enumerate_basis() -> Dict[Tuple[str, str], int]:
    basis: Dict[Tuple[str, str], int] = {}
    for vocabulary, tokens in VOCABULARIES.items():
        for token in tokens:
            basis[(vocabulary, token)] = len(basis)
    return basis


# Canonical unit-vector position of every token; fixed by table order.
TOKEN_BASIS: Dict[Tuple[str, str], int] = _enumerate_basis()


def require_token(vocabulary: str, token: str) -> str:
    tokens = VOCABULARIES.get(vocabulary)
    if tokens is None:
        raise VocabularyError(f"Unknown vocabulary: {vocabulary}")
    if token not in tokens:
        raise VocabularyError(
            f"Unknown {vocabulary} token '{token}'. Expected one of: {', '.join(tokens)}"
        )
    return token


def basis_index(vocabulary: str, token: str) -> int:
    require_token(vocabulary, token)
    return TOKEN_BASIS[(vocabulary, token)]


def object_token_indices(
    category: str,
    color: str,
    style_tokens: Iterable[str],
) -> List[int]:
    indices = {basis_index("category", category), basis_index("color", color)}
    for token in style_tokens:
        indices.add(basis_index("style", token))
    return sorted(indices)
