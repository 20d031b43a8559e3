from __future__ import annotations

from typing import Optional

import streamlit as st

from core.config import MAX_ITERATIONS_CAP, LoopConfig
from core.validation import ConfigError


def apply_styles() -> None:
    st.markdown(
        """
        <style>
            .stApp {
                background: #f8fafc;
            }

            .block-container {
                padding-top: 3rem;
                padding-bottom: 2.5rem;
                max-width: 1000px;
            }

            h1 {
                letter-spacing: 0 !important;
                margin-bottom: 0.15rem !important;
            }

            [data-testid="stCaptionContainer"] {
                color: #64748b;
            }

            div[data-testid="stSelectbox"] {
                margin-top: 0.25rem;
                margin-bottom: 0.9rem;
            }

            div.stButton > button {
                border-radius: 8px !important;
                padding: 0.55rem 0.95rem !important;
                font-size: 14px !important;
                font-weight: 600 !important;
                border: 1px solid #dbe3ef !important;
            }

            div.stButton > button[kind="primary"] {
                background: #2563eb !important;
                border-color: #2563eb !important;
                color: #ffffff !important;
            }

            div.stButton > button[kind="primary"]:hover {
                background: #1d4ed8 !important;
                border-color: #1d4ed8 !important;
            }

            .run-card {
                background: #ffffff;
                border: 1px solid #e2e8f0;
                padding: 15px 17px;
                border-radius: 8px;
                margin: 0.85rem 0 1.05rem;
                box-shadow: 0 8px 20px rgba(15, 23, 42, 0.035);
            }

            .run-card-title {
                font-size: 15px;
                font-weight: 600;
                margin-bottom: 0.2rem;
            }

            .run-card-copy {
                font-size: 13px;
                color: #64748b;
                line-height: 1.4;
            }
        </style>
        """,
        unsafe_allow_html=True,
    )


def render_intro_card() -> None:
    st.markdown(
        """
        <div class="run-card">
            <div class="run-card-title">Generate, evaluate, repair</div>
            <div class="run-card-copy">
                Pick a scenario, tune the loop thresholds in the sidebar and run.
                Scene-level misses trigger a re-render with emphasized conditions;
                weak objects are repaired in place with a synthesized proxy.
            </div>
        </div>
        """,
        unsafe_allow_html=True,
    )


def render_config_form() -> Optional[LoopConfig]:
    """Sidebar controls; returns a config on submit, None otherwise or when invalid."""
    defaults = LoopConfig()
    with st.sidebar.form("loop_config"):
        st.markdown("**Loop settings**")
        gamma_g = st.slider("Macro threshold", 0.05, 0.95, defaults.gamma_g, 0.05)
        gamma_o = st.slider("Object threshold", 0.05, 0.95, defaults.gamma_o, 0.05)
        gamma_c = st.slider("Identity threshold", 0.05, 0.95, defaults.gamma_c, 0.05)
        lam = st.slider("Semantic weight", 0.05, 0.95, defaults.lam, 0.05)
        alpha = st.number_input("Emphasis multiplier", min_value=1.1, value=defaults.alpha, step=0.5)
        max_iterations = st.number_input(
            "Iteration budget", min_value=1, max_value=MAX_ITERATIONS_CAP, value=defaults.max_iterations
        )
        seed = st.number_input("Seed", min_value=0, value=defaults.seed, step=1)
        feather_px = st.number_input("Feather (px)", min_value=0, max_value=16, value=defaults.feather_px)
        apply_faults = st.checkbox("Apply fault plan", value=defaults.apply_faults)
        open_loop = st.checkbox("Open loop (single pass)", value=defaults.open_loop)
        local_conditions = st.checkbox("Object-level conditions", value=defaults.local_conditions)
        refine = st.checkbox("Local refinement", value=defaults.refine)
        submitted = st.form_submit_button("Run", type="primary")

    if not submitted:
        return None
    try:
        return LoopConfig(
            gamma_g=float(gamma_g),
            gamma_o=float(gamma_o),
            gamma_c=float(gamma_c),
            lam=float(lam),
            alpha=float(alpha),
            max_iterations=int(max_iterations),
            seed=int(seed),
            feather_px=int(feather_px),
            apply_faults=apply_faults,
            open_loop=open_loop,
            local_conditions=local_conditions,
            refine=refine,
        )
    except ConfigError as exc:
        st.sidebar.error(str(exc))
        return None
