from __future__ import annotations

from typing import Callable

import streamlit as st

from cli import RunResult


REPORT_DOWNLOAD_FILENAME = "vistaloop-report.html"
REPORT_DOWNLOAD_MIME = "text/html"


def build_report_download(report_html: str) -> tuple[bytes, str, str]:
    return (
        report_html.encode("utf-8"),
        REPORT_DOWNLOAD_FILENAME,
        REPORT_DOWNLOAD_MIME,
    )


def _render_frames(result: RunResult) -> None:
    video = result.video
    frame_index = st.slider("Frame", 0, video.num_frames - 1, 0) if video.num_frames > 1 else 0
    columns = st.columns(min(video.num_views, 3))
    for view in range(video.num_views):
        frame = video.frame(view, frame_index)
        columns[view % len(columns)].image(frame.pixels, caption=f"view {view}", use_container_width=True)


def render_results(on_reset: Callable[[], None]) -> None:
    result: RunResult = st.session_state.result
    report_html = st.session_state.report_html
    log = result.log
    final = log.final_report

    st.subheader("Run Result")

    col1, col2, col3 = st.columns(3)
    col1.metric("Status", log.status.replace("_", " "))
    col2.metric("Iterations", f"{len(log.iterations)}/{log.max_iterations}")
    col3.metric("Macro score", f"{final.s_macro:.3f}" if final else "n/a")

    st.divider()

    tab1, tab2, tab3 = st.tabs(["Report", "Frames", "Raw Data"])

    with tab1:
        st.components.v1.html(report_html, height=900, scrolling=True)
        download_data, download_name, download_mime = build_report_download(report_html)
        st.download_button(
            "Download Report",
            data=download_data,
            file_name=download_name,
            mime=download_mime,
            type="primary",
        )

    with tab2:
        _render_frames(result)

    with tab3:
        st.json(log.to_dict())
        st.json(result.metrics.to_dict())

    if st.button("Start New Run", type="primary"):
        on_reset()
