from __future__ import annotations

import json

import numpy as np
import pytest

from cli import EXIT_BUDGET_EXHAUSTED, EXIT_INPUT_ERROR, EXIT_PASS, HTML_REPORT_FILE, execute_run, main
from core.condition_encoder import build_conditions
from core.config import THREADS_ENV_VAR, LoopConfig
from core.image_io import dumps_deterministic, read_pgm, write_pgm8, write_pgm16, write_ppm
from core.scenario_loader import load_scenario, scenario_path
from core.validation import ContractError, ScenarioSyntaxError
from reporting.exports import AUDIT_FILE, METRICS_FILE, REPORT_FILE, frame_name, load_video
from reporting.report_builder import build_report_html


def _args(command, scenario, out, *extra):
    return [command, "--scenario", str(scenario_path(scenario)), "--out", str(out), *extra]


def test_run_writes_every_artifact(tmp_path):
    code = main(_args("run", "demo_wrong_color", tmp_path, "--html", "--export-masks"))
    assert code == EXIT_PASS
    for name in (AUDIT_FILE, REPORT_FILE, METRICS_FILE, HTML_REPORT_FILE):
        assert (tmp_path / name).is_file()
    assert (tmp_path / frame_name(0, 0)).is_file()
    assert (tmp_path / frame_name(5, 7)).is_file()
    assert list(tmp_path.glob("*_mask0.pgm"))

    audit = json.loads((tmp_path / AUDIT_FILE).read_text(encoding="utf-8"))
    assert audit["status"] == "passed"


def test_run_outputs_are_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(_args("run", "demo_weather_fault", first)) == EXIT_PASS
    assert main(_args("run", "demo_weather_fault", second)) == EXIT_PASS
    for name in (AUDIT_FILE, REPORT_FILE, METRICS_FILE, frame_name(2, 3)):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_thread_count_does_not_change_the_outputs(tmp_path, monkeypatch):
    outputs = []
    for threads in ("1", "4"):
        monkeypatch.setenv(THREADS_ENV_VAR, threads)
        out = tmp_path / f"threads{threads}"
        assert main(_args("run", "demo_weather_fault", out, "--export-masks")) == EXIT_PASS
        outputs.append({path.name: path.read_bytes() for path in sorted(out.iterdir())})
    assert outputs[0].keys() == outputs[1].keys()
    assert outputs[0] == outputs[1]


def test_run_without_refinement_cannot_fix_an_object(tmp_path):
    assert main(_args("run", "demo_wrong_color", tmp_path, "--no-refine")) == EXIT_BUDGET_EXHAUSTED
    metrics = json.loads((tmp_path / METRICS_FILE).read_text(encoding="utf-8"))
    assert metrics["mode"] == "closed_loop+no_refine"


def test_exhausted_budget_sets_exit_code(tmp_path):
    assert main(_args("run", "demo_unfixable", tmp_path, "--max-iters", "2")) == EXIT_BUDGET_EXHAUSTED


def test_bad_scenario_file_is_an_input_error(tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    code = main(["run", "--scenario", str(broken), "--out", str(tmp_path / "out")])
    assert code == EXIT_INPUT_ERROR
    assert "error:" in capsys.readouterr().err


def test_invalid_flags_are_an_input_error(tmp_path):
    assert main(_args("run", "demo", tmp_path, "--gamma-g", "1.5")) == EXIT_INPUT_ERROR


def test_render_then_evaluate_then_metrics(tmp_path):
    assert main(_args("render", "demo", tmp_path)) == EXIT_PASS
    assert (tmp_path / frame_name(0, 0)).is_file()
    assert main(_args("evaluate", "demo", tmp_path)) == EXIT_PASS
    assert main(_args("metrics", "demo", tmp_path)) == EXIT_PASS

    report = json.loads((tmp_path / REPORT_FILE).read_text(encoding="utf-8"))
    metrics = json.loads((tmp_path / METRICS_FILE).read_text(encoding="utf-8"))
    assert report["s_macro"] == pytest.approx(1.0)
    assert metrics["mode"] == "offline"


def test_loading_frames_of_the_wrong_size_is_rejected(tmp_path):
    scenario = load_scenario("demo")
    assert main(_args("render", "demo", tmp_path)) == EXIT_PASS
    write_ppm(tmp_path / frame_name(1, 2), np.zeros((4, 4, 3), dtype=np.uint8))
    with pytest.raises(ContractError, match="expects"):
        load_video(tmp_path, scenario, build_conditions(scenario), 42)


def test_deterministic_json_rounds_and_sorts():
    text = dumps_deterministic({"b": 1.0 / 3.0, "a": [float("nan"), True]})
    assert text.index('"a"') < text.index('"b"')
    assert "0.333333333" in text
    assert "null" in text


def test_html_report_names_the_outcome():
    scenario = load_scenario("demo_wrong_color")
    result = execute_run(scenario, LoopConfig())
    html = build_report_html(result.log, result.metrics, scenario)
    assert "Loop Audit" in html
    assert "PASSED" in html.upper()
    assert "<script" not in html


def test_instance_ids_keep_sixteen_bits(tmp_path):
    ids = np.arange(12, dtype=np.int32).reshape(3, 4) * 1000
    path = tmp_path / "ids.pgm"
    write_pgm16(path, ids)
    assert path.read_bytes().startswith(b"P5\n4 3\n65535\n")
    assert np.array_equal(read_pgm(path), ids)

    mask = np.zeros((3, 4), dtype=np.uint8)
    mask[1, 2] = 255
    write_pgm8(tmp_path / "mask.pgm", mask)
    assert np.array_equal(read_pgm(tmp_path / "mask.pgm"), mask.astype(np.int32))


def test_color_frames_are_not_read_as_instance_ids(tmp_path):
    write_ppm(tmp_path / "frame.ppm", np.zeros((2, 2, 3), dtype=np.uint8))
    with pytest.raises(ScenarioSyntaxError, match="grayscale"):
        read_pgm(tmp_path / "frame.ppm")
