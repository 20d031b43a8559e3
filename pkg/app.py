import logging

import streamlit as st

from cli import execute_run
from core.config import LoopConfig
from core.scenario_loader import list_scenarios, load_scenario
from core.validation import ScenarioValidationError
from reporting.report_builder import build_report_html
from ui.results import render_results
from ui.wizard import apply_styles, render_config_form, render_intro_card


PLATFORM_NAME = "VISTALOOP"

logger = logging.getLogger(__name__)


def init_state() -> None:
    defaults = {
        "submitted": False,
        "result": None,
        "report_html": None,
        "active_scenario": "demo",
    }

    for key, value in defaults.items():
        if key not in st.session_state:
            st.session_state[key] = value


def reset_run(active_scenario: str | None = None) -> None:
    st.session_state.clear()
    if active_scenario:
        st.session_state.active_scenario = active_scenario
    st.rerun()


def submit_run(scenario_key: str, title: str, config: LoopConfig) -> None:
    try:
        scenario = load_scenario(scenario_key)
    except (ScenarioValidationError, OSError, ValueError) as exc:
        st.error(f"Scenario load failed: {exc}")
        st.stop()

    with st.spinner("Running generation loop..."):
        result = execute_run(scenario, config)
    logger.info("Scenario %s finished with status %s", scenario_key, result.log.status)

    st.session_state.result = result
    st.session_state.report_html = build_report_html(result.log, result.metrics, scenario, title)
    st.session_state.submitted = True
    st.rerun()


def main() -> None:
    st.set_page_config(page_title=PLATFORM_NAME, page_icon="VL", layout="centered")
    apply_styles()
    init_state()

    scenarios = list_scenarios()
    if not scenarios:
        st.error("No scenarios found in the scenarios directory.")
        st.stop()
    scenario_keys = list(scenarios.keys())
    if st.session_state.active_scenario not in scenario_keys:
        st.session_state.active_scenario = scenario_keys[0]

    scenario_choice = st.selectbox(
        "Select Scenario",
        scenario_keys,
        index=scenario_keys.index(st.session_state.active_scenario),
        format_func=lambda key: scenarios[key],
    )

    if scenario_choice != st.session_state.active_scenario:
        reset_run(active_scenario=scenario_choice)

    st.title(f"{PLATFORM_NAME} - {scenarios[scenario_choice]}")
    st.caption("Closed-loop multiview driving scene generation")
    render_intro_card()

    config = render_config_form()
    if config is not None:
        submit_run(scenario_choice, scenarios[scenario_choice], config)

    if st.session_state.submitted:
        render_results(on_reset=lambda: reset_run(st.session_state.active_scenario))


if __name__ == "__main__":
    main()
