from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.condition_encoder import ConditionSet, appearance_array
from core.config import LoopConfig
from core.evaluator import (
    STATUS_INSUFFICIENT,
    assess_macro,
    batch_features,
    calibrate_heads,
    cosine,
    crop_object_batch,
    expected_appearance,
    index_consistency,
    with_category,
)
from core.generator import MultiviewVideo
from core.geometry import Rect, clip_rect, mask_rect, project_box, rect_iou
from core.scene_model import ObjectSpec, box_at
from modules.vocabulary import CATEGORY_TOKENS


logger = logging.getLogger(__name__)

MATCH_IOU = 0.5
NO_REFERENCE = "no_reference"


@dataclass(frozen=True)
class ObjectMetrics:
    index: int
    layout_iou: Optional[float]
    observations: int
    text_alignment: Optional[float]
    image_alignment: Optional[float]
    image_alignment_status: str
    predicted_category: Optional[str]
    category_correct: Optional[bool]
    index_consistency: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "layout_iou": self.layout_iou,
            "observations": self.observations,
            "text_alignment": self.text_alignment,
            "image_alignment": self.image_alignment,
            "image_alignment_status": self.image_alignment_status,
            "predicted_category": self.predicted_category,
            "category_correct": self.category_correct,
            "index_consistency": self.index_consistency,
        }


@dataclass(frozen=True)
class MetricsReport:
    mode: str
    layout_iou_mean: float
    ap_at_50: float
    category_accuracy: float
    text_alignment_mean: float
    image_alignment_mean: Optional[float]
    index_consistency_mean: Optional[float]
    weather_accuracy: float
    time_accuracy: float
    per_object: Tuple[ObjectMetrics, ...]
    excluded_objects: Tuple[int, ...] = field(default=())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "layout_iou_mean": self.layout_iou_mean,
            "ap_at_50": self.ap_at_50,
            "category_accuracy": self.category_accuracy,
            "text_alignment_mean": self.text_alignment_mean,
            "image_alignment_mean": self.image_alignment_mean,
            "index_consistency_mean": self.index_consistency_mean,
            "weather_accuracy": self.weather_accuracy,
            "time_accuracy": self.time_accuracy,
            "excluded_objects": list(self.excluded_objects),
            "objects": [item.to_dict() for item in self.per_object],
        }


def _mean(values: Sequence[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def ground_truth_rect(spec: ObjectSpec, video: MultiviewVideo, view: int, frame_index: int) -> Optional[Rect]:
    box = box_at(spec, frame_index)
    if box is None:
        return None
    camera = video.camera(view, frame_index)
    polygon = project_box(box, camera)
    if polygon is None:
        return None
    return clip_rect(polygon.rect, camera.width, camera.height)


def layout_iou(video: MultiviewVideo, specs: Sequence[ObjectSpec]) -> Tuple[Dict[int, float], Dict[int, int], List[int]]:
    """Per-object mean IoU of the instance-id bbox against the projected box; never-visible objects listed apart."""
    per_object: Dict[int, float] = {}
    counts: Dict[int, int] = {}
    excluded: List[int] = []
    for spec in specs:
        values = []
        for v, t, frame in video.cells():
            truth = ground_truth_rect(spec, video, v, t)
            if truth is None:
                continue
            values.append(rect_iou(mask_rect(frame.instance_ids == spec.index + 1), truth))
        if values:
            per_object[spec.index] = float(np.mean(values))
            counts[spec.index] = len(values)
        else:
            excluded.append(spec.index)
    return per_object, counts, excluded


def detections(video: MultiviewVideo) -> List[Tuple[float, int, int, Rect]]:
    """(confidence, view, frame, bbox) per instance present in each frame; confidence = mask area fraction."""
    found = []
    for v, t, frame in video.cells():
        area = float(frame.instance_ids.size)
        for instance in np.unique(frame.instance_ids):
            if instance == 0:
                continue
            mask = frame.instance_ids == instance
            found.append((float(mask.sum()) / area, v, t, mask_rect(mask)))
    return found


def average_precision(
    found: Sequence[Tuple[float, int, int, Rect]],
    truths: Dict[Tuple[int, int], List[Rect]],
) -> float:
    """All-point interpolated AP at IoU 0.5 with greedy matching in descending confidence."""
    total = sum(len(rects) for rects in truths.values())
    if total == 0:
        return 0.0

    used = {cell: [False] * len(rects) for cell, rects in truths.items()}
    hits = []
    for _, v, t, rect in sorted(found, key=lambda item: (-item[0], item[1], item[2])):
        candidates = truths.get((v, t), [])
        best, best_iou = -1, -1.0
        for position, truth in enumerate(candidates):
            if used[(v, t)][position]:
                continue
            overlap = rect_iou(rect, truth)
            if overlap >= MATCH_IOU and overlap > best_iou:
                best, best_iou = position, overlap
        if best >= 0:
            used[(v, t)][best] = True
        hits.append(best >= 0)

    if not hits:
        return 0.0
    tp = np.cumsum(hits, dtype=float)
    precision = tp / np.arange(1, len(hits) + 1)
    recall = tp / total

    envelope = np.concatenate([[0.0], precision, [0.0]])
    levels = np.concatenate([[0.0], recall, [recall[-1]]])
    for i in range(len(envelope) - 2, -1, -1):
        envelope[i] = max(envelope[i], envelope[i + 1])
    steps = np.flatnonzero(levels[1:] != levels[:-1])
    return float(np.sum((levels[steps + 1] - levels[steps]) * envelope[steps + 1]))


def ap_at_50(video: MultiviewVideo, specs: Sequence[ObjectSpec]) -> float:
    truths: Dict[Tuple[int, int], List[Rect]] = {}
    for v, t, _ in video.cells():
        rects = [ground_truth_rect(spec, video, v, t) for spec in specs]
        truths[(v, t)] = [rect for rect in rects if rect is not None]
    return average_precision(detections(video), truths)


def alignment_scores(
    video: MultiviewVideo,
    conditions: ConditionSet,
) -> Dict[int, Tuple[Optional[float], Optional[float], str]]:
    """(text alignment, image alignment, image status) per object with a nonempty batch."""
    heads = calibrate_heads(conditions, video.cameras, video.seed)
    scores: Dict[int, Tuple[Optional[float], Optional[float], str]] = {}
    for spec in conditions.specs:
        batch = crop_object_batch(video, spec)
        if not batch.crops:
            continue
        visual = batch_features(batch).mean(axis=0)
        text = heads.semantic(conditions.embedding_for(spec.index), visual)
        if spec.reference_appearance is None:
            scores[spec.index] = (text, None, NO_REFERENCE)
        else:
            image = cosine(visual, appearance_array(spec.reference_appearance))
            scores[spec.index] = (text, image, "scored")
    return scores


def predicted_category(video: MultiviewVideo, conditions: ConditionSet, spec: ObjectSpec) -> Optional[str]:
    batch = crop_object_batch(video, spec)
    if not batch.crops:
        return None
    visual = batch_features(batch).mean(axis=0)
    best, best_score = None, -np.inf
    for category in CATEGORY_TOKENS:
        proxy = expected_appearance(
            conditions.global_conditions, with_category(spec, category), video.cameras, video.seed
        )
        if proxy is None:
            continue
        score = cosine(visual, proxy)
        if score > best_score:
            best, best_score = category, score
    return best


def category_accuracy(video: MultiviewVideo, conditions: ConditionSet) -> Tuple[float, Dict[int, Optional[str]]]:
    predictions = {spec.index: predicted_category(video, conditions, spec) for spec in conditions.specs}
    judged = [
        prediction == conditions.spec_for(index).category
        for index, prediction in predictions.items()
        if prediction is not None
    ]
    return (float(np.mean(judged)) if judged else 0.0), predictions


def attribute_accuracy(video: MultiviewVideo, conditions: ConditionSet, gamma_g: float) -> Dict[str, float]:
    _, _, per_frame = assess_macro(video, conditions.global_conditions)
    return {
        attribute: float(np.mean([score >= gamma_g for score in scores])) if scores else 0.0
        for attribute, scores in per_frame.items()
    }


def compute_metrics(
    video: MultiviewVideo,
    conditions: ConditionSet,
    config: LoopConfig,
    mode: str = "closed_loop",
) -> MetricsReport:
    specs = conditions.specs
    ious, counts, excluded = layout_iou(video, specs)
    alignments = alignment_scores(video, conditions)
    accuracy, predictions = category_accuracy(video, conditions)
    attributes = attribute_accuracy(video, conditions, config.gamma_g)

    per_object = []
    for spec in specs:
        text, image, image_status = alignments.get(spec.index, (None, None, STATUS_INSUFFICIENT))
        prediction = predictions.get(spec.index)
        per_object.append(
            ObjectMetrics(
                index=spec.index,
                layout_iou=ious.get(spec.index),
                observations=counts.get(spec.index, 0),
                text_alignment=text,
                image_alignment=image,
                image_alignment_status=image_status,
                predicted_category=prediction,
                category_correct=None if prediction is None else prediction == spec.category,
                index_consistency=index_consistency(video, spec)[0],
            )
        )

    report = MetricsReport(
        mode=mode,
        layout_iou_mean=_mean(list(ious.values())) or 0.0,
        ap_at_50=ap_at_50(video, specs),
        category_accuracy=accuracy,
        text_alignment_mean=_mean([item.text_alignment for item in per_object if item.text_alignment is not None]) or 0.0,
        image_alignment_mean=_mean([item.image_alignment for item in per_object if item.image_alignment is not None]),
        index_consistency_mean=_mean(
            [item.index_consistency for item in per_object if item.index_consistency is not None]
        ),
        weather_accuracy=attributes.get("weather", 0.0),
        time_accuracy=attributes.get("time_of_day", 0.0),
        per_object=tuple(per_object),
        excluded_objects=tuple(excluded),
    )
    logger.info(
        "Metrics: layout IoU %.3f, AP@50 %.3f, category accuracy %.3f",
        report.layout_iou_mean,
        report.ap_at_50,
        report.category_accuracy,
    )
    return report
