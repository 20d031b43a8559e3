from __future__ import annotations

import pytest

from core.config import LoopConfig
from core.metrics import (
    NO_REFERENCE,
    attribute_accuracy,
    average_precision,
    compute_metrics,
    detections,
    layout_iou,
)


@pytest.fixture(scope="module")
def clean_metrics(clean_video, demo_conditions):
    return compute_metrics(clean_video, demo_conditions, LoopConfig(), mode="offline")


def test_perfect_detections_score_full_precision():
    truths = {(0, 0): [(0.0, 0.0, 10.0, 10.0)], (0, 1): [(5.0, 5.0, 15.0, 15.0)]}
    found = [(0.8, 0, 0, (0.0, 0.0, 10.0, 10.0)), (0.6, 0, 1, (5.0, 5.0, 15.0, 15.0))]
    assert average_precision(found, truths) == pytest.approx(1.0)


def test_confident_false_positive_halves_precision():
    truths = {(0, 0): [(0.0, 0.0, 10.0, 10.0)]}
    found = [(0.9, 0, 0, (50.0, 50.0, 60.0, 60.0)), (0.5, 0, 0, (0.0, 0.0, 10.0, 10.0))]
    assert average_precision(found, truths) == pytest.approx(0.5)


def test_duplicate_detection_is_not_matched_twice():
    truths = {(0, 0): [(0.0, 0.0, 10.0, 10.0)]}
    found = [(0.9, 0, 0, (0.0, 0.0, 10.0, 10.0)), (0.4, 0, 0, (1.0, 0.0, 10.0, 10.0))]
    assert average_precision(found, truths) == pytest.approx(1.0)


def test_missed_truth_caps_recall():
    truths = {(0, 0): [(0.0, 0.0, 10.0, 10.0), (20.0, 20.0, 30.0, 30.0)]}
    found = [(0.9, 0, 0, (0.0, 0.0, 10.0, 10.0))]
    assert average_precision(found, truths) == pytest.approx(0.5)


def test_detection_below_match_iou_is_a_miss():
    truths = {(0, 0): [(0.0, 0.0, 10.0, 10.0)]}
    found = [(0.9, 0, 0, (6.0, 0.0, 16.0, 10.0))]
    assert average_precision(found, truths) == 0.0


def test_no_truths_scores_zero():
    assert average_precision([], {}) == 0.0


def test_detections_come_from_instance_ids(clean_video):
    found = detections(clean_video)
    assert len(found) == 5 * 8
    assert all(0.0 < confidence < 1.0 for confidence, _, _, _ in found)


def test_clean_layout_matches_the_projected_boxes(clean_video, demo_conditions):
    per_object, counts, excluded = layout_iou(clean_video, demo_conditions.specs)
    assert excluded == []
    assert set(per_object) == {0, 1, 2, 3, 4}
    assert all(value > 0.5 for value in per_object.values())
    assert all(count >= 8 for count in counts.values())


def test_clean_metrics(clean_metrics):
    assert clean_metrics.mode == "offline"
    assert clean_metrics.ap_at_50 >= 0.9
    assert clean_metrics.category_accuracy == pytest.approx(1.0)
    assert clean_metrics.text_alignment_mean == pytest.approx(1.0, abs=1e-6)
    assert clean_metrics.weather_accuracy == 1.0
    assert clean_metrics.time_accuracy == 1.0
    assert clean_metrics.image_alignment_mean is None
    assert clean_metrics.excluded_objects == ()


def test_objects_without_reference_report_no_image_alignment(clean_metrics):
    for item in clean_metrics.per_object:
        assert item.image_alignment is None
        assert item.image_alignment_status == NO_REFERENCE
        assert item.category_correct is True


def test_metrics_serialize_every_field(clean_metrics):
    payload = clean_metrics.to_dict()
    assert payload["mode"] == "offline"
    assert len(payload["objects"]) == 5
    assert payload["excluded_objects"] == []


def test_tinted_weather_fails_every_frame(snow_tint_video, demo_conditions):
    accuracy = attribute_accuracy(snow_tint_video, demo_conditions, 0.8)
    assert accuracy["weather"] == 0.0
    assert accuracy["time_of_day"] == 1.0
