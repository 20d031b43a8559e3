from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import pytest


PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from core.condition_encoder import build_conditions  # noqa: E402
from core.generator import render_scene  # noqa: E402
from core.scenario_loader import load_scenario  # noqa: E402
from core.scene_model import FaultSpec  # noqa: E402


def with_faults(scenario, *faults: FaultSpec):
    return replace(scenario, fault_plan=tuple(faults))


@pytest.fixture(scope="session")
def demo():
    return load_scenario("demo")


@pytest.fixture(scope="session")
def minimal():
    return load_scenario("minimal")


@pytest.fixture(scope="session")
def demo_conditions(demo):
    return build_conditions(demo)


@pytest.fixture(scope="session")
def clean_video(demo, demo_conditions):
    return render_scene(demo_conditions, demo.rig, demo.num_frames, seed=42)


@pytest.fixture(scope="session")
def wrong_color_video(demo, demo_conditions):
    fault = FaultSpec(kind="wrong_color", target=0, deactivation_weight=8.0, severity=1.0)
    return render_scene(demo_conditions, demo.rig, demo.num_frames, seed=42, fault_plan=(fault,))


@pytest.fixture(scope="session")
def snow_tint_video(demo, demo_conditions):
    fault = FaultSpec(kind="weather_tint", target=None, deactivation_weight=2.0, severity=1.0)
    return render_scene(demo_conditions, demo.rig, demo.num_frames, seed=42, fault_plan=(fault,))
