from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.transform import Rotation

from core.geometry import (
    camera_depth,
    clip_rect,
    convex_hull,
    fill_convex,
    mask_rect,
    project_box,
    project_points,
    rect_iou,
)
from core.scene_model import BoxPose3D, Camera


coordinates = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)
rects = st.tuples(coordinates, coordinates, st.floats(0.5, 40.0), st.floats(0.5, 40.0)).map(
    lambda r: (r[0], r[1], r[0] + r[2], r[1] + r[3])
)


def test_point_ahead_of_front_camera_projects_below_center(demo):
    camera = demo.rig[0]
    uv = project_points(camera.world_to_camera(np.array([[8.0, 0.0, 0.75]])), camera)
    assert uv[0] == pytest.approx([64.0, 70.0])
    assert camera_depth((8.0, 0.0, 0.75), camera) == pytest.approx(8.0)


def test_box_behind_the_camera_is_not_projected(demo):
    box = BoxPose3D(center=(-10.0, 0.0, 0.75), size=(4.0, 2.0, 1.5), yaw=0.0)
    assert project_box(box, demo.rig[0]) is None


def test_box_straddling_near_plane_is_clipped(demo):
    box = BoxPose3D(center=(0.0, 0.0, 0.75), size=(4.0, 2.0, 1.5), yaw=0.0)
    polygon = project_box(box, demo.rig[0])
    assert polygon is not None
    assert polygon.depth >= demo.rig[0].near


def test_hull_is_counter_clockwise_without_interior_points():
    points = np.array([[0, 0], [4, 0], [4, 4], [0, 4], [2, 2], [1, 3]], dtype=float)
    hull = convex_hull(points)
    assert len(hull) == 4
    signed_area = 0.5 * np.sum(hull[:, 0] * np.roll(hull[:, 1], -1) - np.roll(hull[:, 0], -1) * hull[:, 1])
    assert signed_area == pytest.approx(16.0)


def test_fill_uses_pixel_centers():
    hull = convex_hull(np.array([[1, 1], [4, 1], [4, 3], [1, 3]], dtype=float))
    mask = fill_convex(hull, 6, 5)
    assert mask.sum() == 6
    assert mask_rect(mask) == (1.0, 1.0, 4.0, 3.0)


def test_degenerate_hull_fills_nothing():
    assert not fill_convex(np.array([[1.0, 1.0], [3.0, 3.0]]), 8, 8).any()


def test_hull_fully_off_screen_fills_nothing():
    hull = convex_hull(np.array([[-9, -9], [-5, -9], [-5, -5]], dtype=float))
    assert not fill_convex(hull, 8, 8).any()


@given(rects, rects)
def test_iou_is_symmetric_and_bounded(a, b):
    value = rect_iou(a, b)
    assert 0.0 <= value <= 1.0
    assert value == pytest.approx(rect_iou(b, a))


@given(rects)
def test_iou_with_itself_is_one(a):
    assert rect_iou(a, a) == pytest.approx(1.0)


def test_iou_of_absent_rect_is_zero():
    assert rect_iou(None, (0.0, 0.0, 1.0, 1.0)) == 0.0


@pytest.mark.parametrize("shifted", [(0.5, 0.0, 1.5, 1.0), (0.0, 0.5, 1.0, 1.5)])
def test_unit_squares_half_overlapping_score_one_third(shifted):
    assert rect_iou((0.0, 0.0, 1.0, 1.0), shifted) == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_clip_rect_drops_offscreen_rectangles():
    assert clip_rect((-5.0, 2.0, 3.0, 6.0), 10, 10) == (0.0, 2.0, 3.0, 6.0)
    assert clip_rect((12.0, 2.0, 15.0, 6.0), 10, 10) is None


def _camera(rotation=np.eye(3), translation=(0.0, 0.0, 0.0), focal=100.0):
    return Camera(
        fx=focal,
        fy=focal,
        cx=64.0,
        cy=64.0,
        width=128,
        height=128,
        rotation=tuple(float(v) for v in np.asarray(rotation).reshape(-1)),
        translation=tuple(float(v) for v in translation),
        near=0.1,
    )


def _homogeneous_corners(box, camera):
    length, width, height = box.size
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    local = signs * np.array([length, width, height]) / 2.0
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    world = local @ np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]).T + np.array(box.center)

    intrinsics = np.array([[camera.fx, 0.0, camera.cx], [0.0, camera.fy, camera.cy], [0.0, 0.0, 1.0]])
    extrinsics = np.hstack([camera.rotation_matrix(), np.array(camera.translation)[:, None]])
    image = (intrinsics @ extrinsics @ np.hstack([world, np.ones((8, 1))]).T).T
    return image[:, :2] / image[:, 2:3], image[:, 2]


def test_projection_matches_a_homogeneous_oracle():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(10_000):
        camera = _camera(
            rotation=Rotation.random(random_state=rng).as_matrix(),
            translation=rng.uniform(-5.0, 5.0, 3),
            focal=float(rng.uniform(40.0, 200.0)),
        )
        box = BoxPose3D(
            center=tuple(rng.uniform(-20.0, 20.0, 3)),
            size=tuple(rng.uniform(0.3, 6.0, 3)),
            yaw=float(rng.uniform(-np.pi, np.pi)),
        )
        uv, depth = _homogeneous_corners(box, camera)
        polygon = project_box(box, camera)
        if np.all(depth <= camera.near):
            assert polygon is None
        elif np.all(depth > camera.near):
            expected = (uv[:, 0].min(), uv[:, 1].min(), uv[:, 0].max(), uv[:, 1].max())
            assert polygon.rect == pytest.approx(expected, abs=1e-6)
            checked += 1
        else:
            assert polygon is not None
    assert checked > 1000


def test_corner_one_unit_right_lands_ten_pixels_right():
    camera = _camera()
    uv = project_points(np.array([[1.0, 0.0, 10.0]]), camera)
    assert uv[0] == pytest.approx([74.0, 64.0], abs=1e-6)


def test_tiny_box_on_the_axis_projects_to_the_principal_point():
    polygon = project_box(BoxPose3D(center=(0.0, 0.0, 10.0), size=(0.01, 0.01, 0.01), yaw=0.0), _camera())
    u0, v0, u1, v1 = polygon.rect
    assert (u0 + u1) / 2.0 == pytest.approx(64.0)
    assert (v0 + v1) / 2.0 == pytest.approx(64.0)


@given(st.floats(-40.0, -0.2), st.floats(-10.0, 10.0), st.floats(0.2, 5.0))
def test_boxes_behind_the_near_plane_are_absent(depth, lateral, size):
    # Identity camera: z is depth, so a box whose far face sits behind the near plane is invisible.
    box = BoxPose3D(center=(lateral, 0.0, depth - size), size=(size, size, size), yaw=0.0)
    assert project_box(box, _camera()) is None
