from __future__ import annotations

import copy
import json
import math

import pytest
from hypothesis import given, strategies as st

from core.generator import posed_cameras
from core.scenario_loader import SCENARIOS_ROOT, list_scenarios, load_scenario_file, scenario_path
from core.scene_model import (
    BoxPose3D,
    ObjectSpec,
    box_at,
    normalize_yaw,
    parse_scenario,
    scenario_from_dict,
    serialize_scenario,
)
from core.validation import (
    ScenarioSemanticError,
    ScenarioSyntaxError,
    ScenarioValidationError,
    VocabularyError,
)


def demo_dict():
    return json.loads((SCENARIOS_ROOT / "demo.json").read_text(encoding="utf-8"))


def _spec(keyframes):
    return ObjectSpec(
        index=0,
        category="car",
        color="red",
        style_tokens=(),
        size=(4.0, 2.0, 1.5),
        keyframes=tuple(keyframes),
    )


@given(st.floats(min_value=-1e4, max_value=1e4, allow_nan=False))
def test_normalize_yaw_lands_in_half_open_range(yaw):
    wrapped = normalize_yaw(yaw)
    assert -math.pi <= wrapped < math.pi
    assert math.isclose(math.cos(wrapped), math.cos(yaw), abs_tol=1e-6)


def test_normalize_yaw_maps_pi_to_minus_pi():
    assert normalize_yaw(math.pi) == -math.pi


def test_box_corners_are_centered_on_the_box():
    box = BoxPose3D(center=(3.0, -1.0, 0.75), size=(4.0, 2.0, 1.5), yaw=0.7)
    corners = box.corners()
    assert corners.shape == (8, 3)
    assert corners.mean(axis=0) == pytest.approx([3.0, -1.0, 0.75])
    assert corners[:, 2].min() == pytest.approx(0.0)


def test_box_at_interpolates_between_keyframes():
    spec = _spec(
        [
            (0, BoxPose3D(center=(0.0, 0.0, 1.0), size=(4.0, 2.0, 1.5), yaw=0.0)),
            (4, BoxPose3D(center=(8.0, 4.0, 1.0), size=(4.0, 2.0, 1.5), yaw=0.0)),
        ]
    )
    box = box_at(spec, 1)
    assert box.center == pytest.approx((2.0, 1.0, 1.0))


def test_box_at_takes_the_short_way_around_for_yaw():
    spec = _spec(
        [
            (0, BoxPose3D(center=(0.0, 0.0, 1.0), size=(4.0, 2.0, 1.5), yaw=3.0)),
            (2, BoxPose3D(center=(0.0, 0.0, 1.0), size=(4.0, 2.0, 1.5), yaw=-3.0)),
        ]
    )
    mid = box_at(spec, 1)
    assert abs(abs(mid.yaw) - math.pi) < 0.05


def test_box_at_outside_lifespan_is_absent():
    spec = _spec(
        [
            (2, BoxPose3D(center=(0.0, 0.0, 1.0), size=(4.0, 2.0, 1.5), yaw=0.0)),
            (5, BoxPose3D(center=(1.0, 0.0, 1.0), size=(4.0, 2.0, 1.5), yaw=0.0)),
        ]
    )
    assert box_at(spec, 1) is None
    assert box_at(spec, 6) is None
    assert box_at(spec, 5).center == pytest.approx((1.0, 0.0, 1.0))


@given(st.integers(min_value=0, max_value=10))
def test_single_keyframe_object_lives_for_one_frame(frame):
    spec = _spec([(3, BoxPose3D(center=(0.0, 0.0, 1.0), size=(4.0, 2.0, 1.5), yaw=0.0))])
    assert (box_at(spec, frame) is not None) == (frame == 3)


def test_bundled_scenarios_all_parse():
    names = list_scenarios()
    assert {"demo", "minimal", "demo_weather_fault", "demo_wrong_color"} <= set(names)
    for name in names:
        load_scenario_file(scenario_path(name))


def test_unknown_scenario_name_lists_alternatives():
    with pytest.raises(ValueError, match="Available scenarios"):
        scenario_path("does-not-exist")


def test_serialize_then_parse_keeps_the_demo(demo):
    assert parse_scenario(serialize_scenario(demo)) == demo


def test_malformed_json_reports_position():
    with pytest.raises(ScenarioSyntaxError, match="line 1"):
        parse_scenario("{not json")


def test_missing_required_key_is_a_syntax_error():
    raw = demo_dict()
    del raw["num_frames"]
    with pytest.raises(ScenarioSyntaxError, match="num_frames"):
        scenario_from_dict(raw)


def test_unknown_category_is_a_vocabulary_error():
    raw = demo_dict()
    raw["objects"][0]["category"] = "hovercraft"
    with pytest.raises(VocabularyError, match="objects\\[0\\].category"):
        scenario_from_dict(raw)


@pytest.mark.parametrize(
    ("mutate", "message"),
    [
        (lambda raw: raw["objects"][1].update(index=0), "duplicate object index 0"),
        (lambda raw: raw["objects"][0].update(size=[4.5, 0.0, 1.5]), "strictly positive"),
        (lambda raw: raw["objects"][0]["trajectory"][0].update(x=99.0), "axis x"),
        (lambda raw: raw["rig"][0].update(rotation=[1, 0, 0, 0, 1, 0, 0, 0, -1]), "orthonormal"),
        (lambda raw: raw["global"]["ego_trajectory"].pop(), "missing frame 7"),
        (lambda raw: raw.update(faults=[{"kind": "wrong_color", "target": 42}]), "no object with index 42"),
        (lambda raw: raw.update(faults=[{"kind": "weather_tint", "target": "global"}]), "deactivation_weight"),
        (lambda raw: raw["global"].update(emphasis_weights={"weather": 20.0}), "outside"),
    ],
)
def test_semantic_violations_name_the_field(mutate, message):
    raw = copy.deepcopy(demo_dict())
    mutate(raw)
    with pytest.raises(ScenarioValidationError, match=message):
        scenario_from_dict(raw)


def test_repeated_keyframe_frame_is_rejected():
    raw = demo_dict()
    trajectory = raw["objects"][0]["trajectory"]
    trajectory[1]["frame"] = trajectory[0]["frame"]
    with pytest.raises(ScenarioSemanticError, match="gap or repeat"):
        scenario_from_dict(raw)


def test_missing_file_raises_file_not_found(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_scenario_file(tmp_path / "nope.json")


def test_static_ego_leaves_the_rig_in_place(demo, demo_conditions):
    grid = posed_cameras(demo_conditions, demo.rig, demo.num_frames)
    for camera, row in zip(demo.rig, grid):
        posed = row[-1]
        assert posed.rotation == pytest.approx(camera.rotation)
        assert posed.translation == pytest.approx(camera.translation)
