from __future__ import annotations

from dataclasses import replace
from itertools import combinations

import numpy as np
import pytest

from core.condition_encoder import build_conditions
from core.generator import (
    FaultIndex,
    apply_atmosphere,
    blur_radius,
    jitter_shift,
    render_base,
    render_scene,
    weather_fault_fires,
)
from core.scene_model import FaultSpec, weights_tuple
from modules.primitives import rotated_color
from modules.signatures import BACKGROUND, SEPARATION_FLOOR


def _object_columns(video, view, frame_index, index):
    rows, cols = np.nonzero(video.frame(view, frame_index).instance_ids == index + 1)
    return cols


def test_render_is_deterministic(demo, demo_conditions, clean_video):
    again = render_scene(demo_conditions, demo.rig, demo.num_frames, seed=42)
    for v, t, frame in clean_video.cells():
        assert np.array_equal(frame.pixels, again.frame(v, t).pixels)
        assert np.array_equal(frame.instance_ids, again.frame(v, t).instance_ids)


def test_video_shape_follows_the_rig(demo, clean_video):
    assert clean_video.num_views == 6
    assert clean_video.num_frames == 8
    frame = clean_video.frame(0, 0)
    assert frame.pixels.shape == (128, 128, 3)
    assert frame.pixels.dtype == np.uint8
    assert frame.instance_ids.dtype == np.int32


def test_frames_are_read_only(clean_video):
    with pytest.raises(ValueError):
        clean_video.frame(0, 0).pixels[0, 0, 0] = 1


def test_each_demo_object_is_seen_by_its_own_camera(clean_video):
    expected_view = {0: 0, 1: 1, 2: 2, 3: 3, 4: 5}
    for index, view in expected_view.items():
        for t in range(clean_video.num_frames):
            assert _object_columns(clean_video, view, t, index).size > 0


def test_minimal_scenario_renders_an_empty_road(minimal):
    video = render_scene(build_conditions(minimal), minimal.rig, minimal.num_frames, seed=0)
    frame = video.frame(0, 0)
    assert not frame.instance_ids.any()
    assert np.array_equal(
        frame.pixels,
        render_base("sunny", "day", video.camera(0, 0), minimal.global_conditions.road_map),
    )


def test_background_cache_is_read_only(demo):
    base = render_base("sunny", "day", demo.rig[0], demo.global_conditions.road_map)
    assert not base.flags.writeable
    assert base is render_base("sunny", "day", demo.rig[0], demo.global_conditions.road_map)


def test_night_is_darker_than_day(demo):
    road = demo.global_conditions.road_map
    day = render_base("sunny", "day", demo.rig[0], road)
    night = render_base("sunny", "night", demo.rig[0], road)
    assert night.mean() < 0.5 * day.mean()


def test_snow_frosts_objects():
    colors = np.array([[90.0, 90.0, 90.0]])
    snowy = apply_atmosphere(colors, np.array([5.0]), "snow")
    assert snowy.min() > colors.min()


@pytest.mark.parametrize("view", [0, 3])
def test_background_signatures_are_separable(demo, view):
    road = demo.global_conditions.road_map
    means = {
        key: render_base(*key, demo.rig[view], road).reshape(-1, 3).mean(axis=0) / 255.0
        for key in BACKGROUND
    }
    for first, second in combinations(means, 2):
        assert np.abs(means[first] - means[second]).sum() >= SEPARATION_FLOOR, (first, second)


def test_fog_thickens_with_distance():
    colors = np.array([[20.0, 20.0, 20.0], [20.0, 20.0, 20.0]])
    fogged = apply_atmosphere(colors, np.array([1.0, 40.0]), "fog")
    assert fogged[1].mean() > fogged[0].mean()


def test_wrong_color_changes_only_the_target(clean_video, wrong_color_video):
    changed = clean_video.frame(0, 0).pixels != wrong_color_video.frame(0, 0).pixels
    assert changed.any()
    inside = clean_video.frame(0, 0).instance_ids == 1
    assert not changed.any(axis=2)[~inside].any()
    for view in range(1, clean_video.num_views):
        assert np.array_equal(clean_video.frame(view, 0).pixels, wrong_color_video.frame(view, 0).pixels)


def test_wrong_color_rotates_around_the_wheel():
    assert rotated_color("red") == "green"
    assert rotated_color("yellow") == "blue"
    assert rotated_color("white") == "red"


def test_drop_object_hides_odd_frames(demo, demo_conditions):
    fault = FaultSpec(kind="drop_object", target=0, deactivation_weight=8.0, severity=1.0)
    video = render_scene(demo_conditions, demo.rig, demo.num_frames, seed=42, fault_plan=(fault,))
    for t in range(video.num_frames):
        visible = _object_columns(video, 0, t, 0).size > 0
        assert visible == (t % 2 == 0)


def test_jitter_shifts_the_box_horizontally(demo, demo_conditions, clean_video):
    fault = FaultSpec(kind="jitter_box", target=0, deactivation_weight=8.0, severity=1.0)
    video = render_scene(demo_conditions, demo.rig, demo.num_frames, seed=42, fault_plan=(fault,))
    clean_center = _object_columns(clean_video, 0, 0, 0).mean()
    even = _object_columns(video, 0, 0, 0).mean()
    odd = _object_columns(video, 0, 1, 0).mean()
    assert even - clean_center == pytest.approx(10.0, abs=1.0)
    assert odd - clean_center == pytest.approx(-10.0, abs=1.0)


def test_jitter_offset_scales_with_severity():
    faults = FaultIndex.build([FaultSpec("jitter_box", 3, 8.0, 0.25)])
    assert jitter_shift(faults, 3, 0) == (3.0, 0.0)
    assert jitter_shift(faults, 3, 1) == (-3.0, 0.0)
    assert jitter_shift(faults, 2, 0) == (0.0, 0.0)


def test_blur_keeps_changes_near_the_object(demo, demo_conditions, clean_video):
    fault = FaultSpec(kind="blur_object", target=0, deactivation_weight=8.0, severity=1.0)
    video = render_scene(demo_conditions, demo.rig, demo.num_frames, seed=42, fault_plan=(fault,))
    changed = (clean_video.frame(0, 0).pixels != video.frame(0, 0).pixels).any(axis=2)
    assert changed.any()
    rows, cols = np.nonzero(clean_video.frame(0, 0).instance_ids == 1)
    changed_rows, changed_cols = np.nonzero(changed)
    assert changed_cols.min() >= cols.min() - 3
    assert changed_cols.max() <= cols.max() + 3
    assert changed_rows.min() >= rows.min() - 3
    assert changed_rows.max() <= rows.max() + 3
    assert blur_radius(1.0) == 3


def test_weather_tint_recolors_the_whole_frame(clean_video, snow_tint_video):
    for view in range(clean_video.num_views):
        assert not np.array_equal(clean_video.frame(view, 0).pixels, snow_tint_video.frame(view, 0).pixels)


def test_weather_tint_switches_off_under_emphasis(demo, clean_video):
    fault = FaultSpec(kind="weather_tint", target=None, deactivation_weight=2.0, severity=1.0)
    emphasized = replace(demo.global_conditions, emphasis_weights=weights_tuple({"weather": 2.0}))
    video = render_scene(build_conditions(demo, emphasized), demo.rig, demo.num_frames, seed=42, fault_plan=(fault,))
    assert np.array_equal(video.frame(0, 0).pixels, clean_video.frame(0, 0).pixels)
    assert weather_fault_fires(fault, 1.0)
    assert not weather_fault_fires(fault, 2.0)


def test_seed_changes_dirty_surfaces_only(demo, demo_conditions, clean_video):
    other = render_scene(demo_conditions, demo.rig, demo.num_frames, seed=7)
    assert not np.array_equal(other.frame(3, 0).pixels, clean_video.frame(3, 0).pixels)
    assert np.array_equal(other.frame(0, 0).pixels, clean_video.frame(0, 0).pixels)
    assert other.conditions_fingerprint == clean_video.conditions_fingerprint


def test_half_severity_wrong_color_repaints_odd_frames(demo, demo_conditions, clean_video):
    fault = FaultSpec(kind="wrong_color", target=0, deactivation_weight=8.0, severity=0.5)
    video = render_scene(demo_conditions, demo.rig, demo.num_frames, seed=42, fault_plan=(fault,))
    for t in range(video.num_frames):
        same = np.array_equal(video.frame(0, t).pixels, clean_video.frame(0, t).pixels)
        assert same == (t % 2 == 0)


def test_parked_objects_render_identically_every_frame(clean_video):
    for view in range(clean_video.num_views):
        first = clean_video.frame(view, 0).pixels
        for t in range(1, clean_video.num_frames):
            assert np.array_equal(clean_video.frame(view, t).pixels, first)
