from __future__ import annotations

from typing import Dict, Tuple


RGB = Tuple[float, float, float]
Signature = Tuple[RGB, RGB]

LANE_COLOR: RGB = (235.0, 235.0, 235.0)

RAIN_VEIL: RGB = (100.0, 105.0, 112.0)
RAIN_MIX = 0.45
FOG_COLOR: RGB = (205.0, 205.0, 205.0)
FOG_DISTANCE_M = 12.0
SNOW_OBJECT_MIX = 0.15

# Applied to objects and lane paint. The background takes its colors from BACKGROUND.
TIME_GAIN: Dict[str, RGB] = {
    "day": (1.0, 1.0, 1.0),
    "dusk": (0.9, 0.7, 0.55),
    "night": (0.35, 0.35, 0.35),
}

# (weather, time) -> (sky, ground). Every pair of entries differs by at least
# 40/255 summed over channels in mean-frame color with a level horizon.
BACKGROUND: Dict[Tuple[str, str], Signature] = {
    ("sunny", "day"): ((180.0, 210.0, 235.0), (120.0, 120.0, 120.0)),
    ("rain", "day"): ((150.0, 155.0, 165.0), (95.0, 98.0, 105.0)),
    ("fog", "day"): ((205.0, 205.0, 205.0), (175.0, 175.0, 175.0)),
    ("snow", "day"): ((200.0, 210.0, 225.0), (225.0, 228.0, 235.0)),
    ("sunny", "dusk"): ((162.0, 147.0, 129.0), (108.0, 84.0, 66.0)),
    ("rain", "dusk"): ((135.0, 109.0, 91.0), (86.0, 69.0, 58.0)),
    ("fog", "dusk"): ((185.0, 144.0, 113.0), (158.0, 123.0, 96.0)),
    ("snow", "dusk"): ((180.0, 147.0, 124.0), (203.0, 160.0, 129.0)),
    ("sunny", "night"): ((15.0, 20.0, 45.0), (35.0, 35.0, 38.0)),
    # wet asphalt under street lighting
    ("rain", "night"): ((35.0, 38.0, 45.0), (70.0, 60.0, 45.0)),
    ("fog", "night"): ((75.0, 75.0, 74.0), (65.0, 65.0, 62.0)),
    ("snow", "night"): ((30.0, 35.0, 60.0), (130.0, 140.0, 180.0)),
}

SEPARATION_FLOOR = 40.0 / 255.0

# Weather the generator drifts to when it neglects the requested one.
SUBSTITUTE_WEATHER: Dict[str, str] = {
    "sunny": "snow",
    "rain": "snow",
    "fog": "snow",
    "snow": "rain",
}

# Macro distance normalizer: attribute score = max(0, 1 - d / MACRO_TAU).
MACRO_TAU = 0.6


def background_signature(weather: str, time_of_day: str) -> Signature:
    return BACKGROUND[(weather, time_of_day)]
