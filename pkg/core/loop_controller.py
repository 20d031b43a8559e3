from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

from core.condition_encoder import ConditionSet, build_conditions, global_only
from core.config import W_MAX, LoopConfig
from core.evaluator import (
    STATUS_SCORED,
    AssessmentReport,
    ObjectScore,
    assess_macro,
    assess_object,
    calibrate_heads,
    crop_object_batch,
    evaluate_video,
)
from core.generator import MultiviewVideo, render_scene
from core.refiner import RefinementRecord, refine_object
from core.scene_model import GlobalConditions, Scenario, weights_tuple
from core.validation import ContractError
from modules.vocabulary import GLOBAL_ATTRIBUTES


logger = logging.getLogger(__name__)

PASS = "pass"
REGENERATE = "regenerate"
REFINE = "refine"

STATUS_PASSED = "passed"
STATUS_BUDGET_EXHAUSTED = "budget_exhausted"
STATUS_OPEN_LOOP = "open_loop"


@dataclass(frozen=True)
class Decision:
    kind: str
    flagged_attributes: Tuple[str, ...] = ()
    flagged_objects: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == REGENERATE and not self.flagged_attributes:
            raise ContractError("A regenerate decision must flag at least one attribute")
        if self.kind == REFINE and not self.flagged_objects:
            raise ContractError("A refine decision must flag at least one object")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "flagged_attributes": list(self.flagged_attributes),
            "flagged_objects": list(self.flagged_objects),
        }


@dataclass(frozen=True)
class AuditEntry:
    iteration: int
    emphasis_weights: Dict[str, float]
    report: AssessmentReport
    decision: Decision
    refinements: Tuple[RefinementRecord, ...] = ()
    refined_report: Optional[AssessmentReport] = None
    resolution: Optional[Decision] = None

    @property
    def outcome(self) -> Decision:
        return self.resolution if self.resolution is not None else self.decision

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iteration": self.iteration,
            "emphasis_weights": dict(self.emphasis_weights),
            "report": self.report.to_dict(),
            "decision": self.decision.to_dict(),
            "refinements": [record.object_index for record in self.refinements],
            "refinement_details": [record.to_dict() for record in self.refinements],
            "refined_report": self.refined_report.to_dict() if self.refined_report else None,
            "resolution": self.resolution.to_dict() if self.resolution else None,
        }


@dataclass
class AuditLog:
    iterations: List[AuditEntry] = field(default_factory=list)
    status: str = STATUS_BUDGET_EXHAUSTED
    max_iterations: int = 0
    seed: int = 0

    @property
    def passed(self) -> bool:
        return self.status == STATUS_PASSED

    @property
    def final_report(self) -> Optional[AssessmentReport]:
        if not self.iterations:
            return None
        last = self.iterations[-1]
        return last.refined_report or last.report

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": self.status,
            "max_iterations": self.max_iterations,
            "seed": self.seed,
            "iterations": [entry.to_dict() for entry in self.iterations],
        }


def _below_object_floor(score: ObjectScore, config: LoopConfig) -> bool:
    if score.s_obj < config.gamma_o:
        return True
    return score.index_consistency is not None and score.index_consistency < config.gamma_c


def route(report: AssessmentReport, config: LoopConfig) -> Decision:
    if report.s_macro < config.gamma_g:
        flagged = tuple(
            attribute
            for attribute in GLOBAL_ATTRIBUTES
            if report.per_attribute_macro.get(attribute, 1.0) < config.gamma_g
        )
        # Only reachable through rounding of the mean.
        if not flagged:
            flagged = (min(report.per_attribute_macro, key=report.per_attribute_macro.get),)
        return Decision(kind=REGENERATE, flagged_attributes=flagged)

    flagged_objects = tuple(
        sorted(
            index
            for index, score in report.object_scores.items()
            if score.status == STATUS_SCORED and _below_object_floor(score, config)
        )
    )
    if flagged_objects:
        return Decision(kind=REFINE, flagged_objects=flagged_objects)
    return Decision(kind=PASS)


def emphasize(
    global_conditions: GlobalConditions,
    flagged: Sequence[str],
    alpha: float,
) -> GlobalConditions:
    if not flagged:
        raise ContractError("emphasize needs at least one flagged attribute")
    weights = global_conditions.weights
    for attribute in flagged:
        if attribute not in GLOBAL_ATTRIBUTES:
            raise ContractError(f"Unknown global attribute: {attribute}")
        weights[attribute] = min(weights.get(attribute, 1.0) * alpha, W_MAX)
    return replace(global_conditions, emphasis_weights=weights_tuple(weights))


def reassess(
    report: AssessmentReport,
    video: MultiviewVideo,
    conditions: ConditionSet,
    indices: Sequence[int],
    lam: float,
) -> AssessmentReport:
    """Refresh the macro score and the scores of the given objects only."""
    s_macro, per_attribute, per_frame = assess_macro(video, conditions.global_conditions)
    heads = calibrate_heads(conditions, video.cameras, video.seed)
    scores = dict(report.object_scores)
    for index in indices:
        spec = conditions.spec_for(index)
        scores[index] = assess_object(
            crop_object_batch(video, spec), conditions.embedding_for(index), lam, heads
        )
    return AssessmentReport(
        s_macro=s_macro,
        per_attribute_macro=per_attribute,
        per_frame_macro=per_frame,
        object_scores=scores,
        lam=lam,
        thresholds=report.thresholds,
    )


def _thresholds(config: LoopConfig) -> Dict[str, float]:
    return {"gamma_g": config.gamma_g, "gamma_o": config.gamma_o, "gamma_c": config.gamma_c}



def _render(scenario: Scenario, conditions: ConditionSet, config: LoopConfig, iteration: int) -> MultiviewVideo:
    if not config.local_conditions:
        conditions = build_conditions(global_only(scenario), conditions.global_conditions)
    return render_scene(
        conditions,
        scenario.rig,
        scenario.num_frames,
        config.seed,
        scenario.fault_plan if config.apply_faults else (),
        iteration,
    )


def run_open_loop(scenario: Scenario, config: LoopConfig) -> Tuple[MultiviewVideo, AuditLog]:
    """Single generation and evaluation with no routing; the baseline to compare against."""
    conditions = build_conditions(scenario)
    video = _render(scenario, conditions, config, 1)
    report = evaluate_video(video, conditions, config.lam, _thresholds(config))
    decision = route(report, config)
    log = AuditLog(status=STATUS_OPEN_LOOP, max_iterations=1, seed=config.seed)
    log.iterations.append(
        AuditEntry(
            iteration=1,
            emphasis_weights=conditions.global_conditions.weights,
            report=report,
            decision=decision,
        )
    )
    logger.info("Open-loop run: s_macro=%.3f, decision %s", report.s_macro, decision.kind)
    return video, log


def run_closed_loop(scenario: Scenario, config: LoopConfig) -> Tuple[MultiviewVideo, AuditLog]:
    if config.open_loop:
        return run_open_loop(scenario, config)

    log = AuditLog(max_iterations=config.max_iterations, seed=config.seed)
    global_conditions = scenario.global_conditions
    conditions = build_conditions(scenario, global_conditions)
    video: Optional[MultiviewVideo] = None
    report: Optional[AssessmentReport] = None
    needs_render = True
    # Objects already composited into the current video; compositing them again changes nothing.
    refined: Set[int] = set()

    for iteration in range(1, config.max_iterations + 1):
        if needs_render:
            video = _render(scenario, conditions, config, iteration)
            needs_render = False
            report = None
            refined.clear()

        if report is None:
            report = evaluate_video(video, conditions, config.lam, _thresholds(config))
        decision = route(report, config)
        logger.info(
            "Iteration %d: s_macro=%.3f decision=%s %s",
            iteration,
            report.s_macro,
            decision.kind,
            list(decision.flagged_attributes or decision.flagged_objects),
        )
        entry = AuditEntry(
            iteration=iteration,
            emphasis_weights=global_conditions.weights,
            report=report,
            decision=decision,
        )

        if decision.kind == PASS:
            log.iterations.append(entry)
            log.status = STATUS_PASSED
            break

        if decision.kind == REGENERATE:
            log.iterations.append(entry)
            global_conditions = emphasize(global_conditions, decision.flagged_attributes, config.alpha)
            conditions = build_conditions(scenario, global_conditions)
            needs_render = True
            continue

        pending = [index for index in decision.flagged_objects if index not in refined]
        if not config.refine or not pending:
            if config.refine:
                logger.info(
                    "Iteration %d: objects %s are already refined", iteration, list(decision.flagged_objects)
                )
            log.iterations.append(entry)
            continue

        records = []
        for index in pending:
            video, record, _ = refine_object(video, conditions, index, config.feather_px)
            records.append(record)
            refined.add(index)
        refined_report = reassess(report, video, conditions, pending, config.lam)
        resolution = route(refined_report, config)
        report = None
        logger.info("Iteration %d: after refinement -> %s", iteration, resolution.kind)
        log.iterations.append(
            replace(
                entry,
                refinements=tuple(records),
                refined_report=refined_report,
                resolution=resolution,
            )
        )
        if resolution.kind == PASS:
            log.status = STATUS_PASSED
            break
        if resolution.kind == REGENERATE:
            global_conditions = emphasize(global_conditions, resolution.flagged_attributes, config.alpha)
            conditions = build_conditions(scenario, global_conditions)
            needs_render = True

    if not log.passed:
        logger.warning("Loop stopped after %d iterations without passing", len(log.iterations))
    return video, log
