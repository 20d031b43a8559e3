"""Command-line entry point: run | render | evaluate | metrics."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from core.condition_encoder import build_conditions
from core.config import LoopConfig
from core.evaluator import evaluate_video
from core.generator import MultiviewVideo, render_scene
from core.loop_controller import STATUS_BUDGET_EXHAUSTED, AuditLog, run_closed_loop
from core.metrics import MetricsReport, compute_metrics
from core.scenario_loader import load_scenario_file
from core.scene_model import Scenario
from core.validation import ScenarioValidationError
from reporting.exports import (
    AUDIT_FILE,
    METRICS_FILE,
    REPORT_FILE,
    export_frames,
    export_json,
    export_masks,
    load_video,
)
from reporting.report_builder import build_report_html


logger = logging.getLogger("vistaloop")

EXIT_PASS = 0
EXIT_INPUT_ERROR = 1
EXIT_BUDGET_EXHAUSTED = 2
HTML_REPORT_FILE = "report.html"


@dataclass
class RunResult:
    video: MultiviewVideo
    log: AuditLog
    metrics: MetricsReport

    @property
    def exit_code(self) -> int:
        return EXIT_BUDGET_EXHAUSTED if self.log.status == STATUS_BUDGET_EXHAUSTED else EXIT_PASS


def execute_run(scenario: Scenario, config: LoopConfig) -> RunResult:
    video, log = run_closed_loop(scenario, config)
    conditions = build_conditions(scenario)
    metrics = compute_metrics(video, conditions, config, mode=config.mode)
    return RunResult(video=video, log=log, metrics=metrics)


def write_run(result: RunResult, scenario: Scenario, config: LoopConfig, out_dir: Path, html: bool) -> None:
    export_frames(result.video, out_dir)
    if config.export_masks:
        export_masks(result.video, build_conditions(scenario), out_dir)
    export_json(out_dir, AUDIT_FILE, result.log.to_dict())
    final = result.log.final_report
    export_json(out_dir, REPORT_FILE, final.to_dict() if final else {})
    export_json(out_dir, METRICS_FILE, result.metrics.to_dict())
    if html:
        (out_dir / HTML_REPORT_FILE).write_text(
            build_report_html(result.log, result.metrics, scenario), encoding="utf-8"
        )


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", required=True, type=Path, help="scenario JSON file")
    parser.add_argument("--out", required=True, type=Path, help="run directory")
    parser.add_argument("--seed", type=int, default=42, help="generator seed (unsigned 64-bit)")
    parser.add_argument("--lambda", dest="lam", type=float, default=0.6, help="semantic weight in the object score")
    parser.add_argument("--gamma-g", dest="gamma_g", type=float, default=0.8, help="macro threshold")
    parser.add_argument("--gamma-o", dest="gamma_o", type=float, default=0.7, help="object threshold")
    parser.add_argument("--gamma-c", dest="gamma_c", type=float, default=0.9, help="index-consistency threshold")
    parser.add_argument("--alpha", type=float, default=2.0, help="emphasis multiplier")
    parser.add_argument("--max-iters", dest="max_iters", type=int, default=5, help="iteration budget")
    parser.add_argument("--feather", type=int, default=2, help="compositing feather in pixels")
    parser.add_argument("--no-faults", dest="no_faults", action="store_true", help="ignore the fault plan")
    parser.add_argument("--export-masks", dest="export_masks", action="store_true", help="write refinement masks")
    parser.add_argument("--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vistaloop",
        description="Closed-loop multiview scene generation, evaluation and repair",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="full generate / evaluate / repair loop")
    _add_common(run)
    run.add_argument("--open-loop", dest="open_loop", action="store_true", help="single pass, no routing")
    run.add_argument("--no-local", dest="no_local", action="store_true", help="render without object-level conditions")
    run.add_argument("--no-refine", dest="no_refine", action="store_true", help="route without the refinement branch")
    run.add_argument("--html", action="store_true", help="also write report.html")

    for name, text in (
        ("render", "render frames only"),
        ("evaluate", "evaluate frames already in --out"),
        ("metrics", "compute metrics for frames already in --out"),
    ):
        _add_common(commands.add_parser(name, help=text))
    return parser


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _command_run(flags: argparse.Namespace, scenario: Scenario, config: LoopConfig) -> int:
    result = execute_run(scenario, config)
    write_run(result, scenario, config, flags.out, flags.html)
    print(f"{result.log.status}: {len(result.log.iterations)} iteration(s), outputs in {flags.out}")
    return result.exit_code


def _command_render(flags: argparse.Namespace, scenario: Scenario, config: LoopConfig) -> int:
    conditions = build_conditions(scenario)
    video = render_scene(
        conditions,
        scenario.rig,
        scenario.num_frames,
        config.seed,
        scenario.fault_plan if config.apply_faults else (),
    )
    export_frames(video, flags.out)
    return EXIT_PASS


def _command_evaluate(flags: argparse.Namespace, scenario: Scenario, config: LoopConfig) -> int:
    conditions = build_conditions(scenario)
    video = load_video(flags.out, scenario, conditions, config.seed)
    report = evaluate_video(
        video,
        conditions,
        config.lam,
        {"gamma_g": config.gamma_g, "gamma_o": config.gamma_o, "gamma_c": config.gamma_c},
    )
    export_json(flags.out, REPORT_FILE, report.to_dict())
    return EXIT_PASS


def _command_metrics(flags: argparse.Namespace, scenario: Scenario, config: LoopConfig) -> int:
    conditions = build_conditions(scenario)
    video = load_video(flags.out, scenario, conditions, config.seed)
    export_json(flags.out, METRICS_FILE, compute_metrics(video, conditions, config, mode="offline").to_dict())
    return EXIT_PASS


COMMANDS = {
    "run": _command_run,
    "render": _command_render,
    "evaluate": _command_evaluate,
    "metrics": _command_metrics,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    flags = build_parser().parse_args(argv)
    _configure_logging(flags.verbose)
    try:
        config = LoopConfig.from_flags(flags)
        scenario = load_scenario_file(flags.scenario)
        return COMMANDS[flags.command](flags, scenario, config)
    except (ScenarioValidationError, OSError) as exc:
        logger.debug("Input error", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
