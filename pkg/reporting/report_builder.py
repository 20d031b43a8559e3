from __future__ import annotations

from datetime import datetime
from html import escape
from typing import Dict, List, Optional

from core.evaluator import STATUS_SCORED, AssessmentReport, ObjectScore
from core.loop_controller import (
    PASS,
    REFINE,
    REGENERATE,
    STATUS_BUDGET_EXHAUSTED,
    STATUS_OPEN_LOOP,
    STATUS_PASSED,
    AuditEntry,
    AuditLog,
)
from core.metrics import MetricsReport
from core.scene_model import Scenario


STATUS_STYLES = {
    STATUS_PASSED: {"label": "Passed", "color": "#15803d", "bg": "#dcfce7", "border": "#86efac"},
    STATUS_OPEN_LOOP: {"label": "Open loop", "color": "#1d4ed8", "bg": "#eff6ff", "border": "#bfdbfe"},
    STATUS_BUDGET_EXHAUSTED: {
        "label": "Budget exhausted",
        "color": "#b91c1c",
        "bg": "#fee2e2",
        "border": "#fca5a5",
    },
}

DECISION_STYLES = {
    REGENERATE: {"label": "Regenerate", "color": "#b91c1c", "bg": "#fee2e2", "border": "#fca5a5"},
    REFINE: {"label": "Refine", "color": "#c2410c", "bg": "#ffedd5", "border": "#fdba74"},
    PASS: {"label": "Pass", "color": "#15803d", "bg": "#dcfce7", "border": "#86efac"},
}


def _fmt(value: Optional[float], digits: int = 3) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def _badge(styles: Dict[str, Dict[str, str]], key: str) -> str:
    style = styles.get(key, {"label": key, "color": "#334155", "bg": "#f1f5f9", "border": "#cbd5e1"})
    return (
        f'<span class="badge" style="color:{style["color"]};background:{style["bg"]};'
        f'border-color:{style["border"]};">{escape(style["label"])}</span>'
    )


def _flag_text(entry: AuditEntry) -> str:
    outcome = entry.outcome
    if outcome.flagged_attributes:
        return ", ".join(outcome.flagged_attributes)
    if outcome.flagged_objects:
        return ", ".join(f"#{index}" for index in outcome.flagged_objects)
    return "-"


def _render_iterations(log: AuditLog) -> str:
    if not log.iterations:
        return '<div class="card empty-state">The loop recorded no iterations.</div>'

    rows = ""
    for entry in log.iterations:
        refined = ", ".join(f"#{record.object_index}" for record in entry.refinements) or "-"
        after = _fmt(entry.refined_report.s_macro) if entry.refined_report else "-"
        weights = ", ".join(f"{name} {weight:g}" for name, weight in sorted(entry.emphasis_weights.items()))
        rows += f"""
        <tr>
            <td>{entry.iteration}</td>
            <td>{_fmt(entry.report.s_macro)}</td>
            <td>{_badge(DECISION_STYLES, entry.decision.kind)}</td>
            <td>{escape(refined)}</td>
            <td>{after}</td>
            <td>{_badge(DECISION_STYLES, entry.outcome.kind)}</td>
            <td>{escape(_flag_text(entry))}</td>
            <td class="muted">{escape(weights or "-")}</td>
        </tr>
        """
    return f"""
    <table>
        <thead>
            <tr>
                <th>Iter</th><th>Macro</th><th>Decision</th><th>Refined</th>
                <th>Macro after</th><th>Outcome</th><th>Flags</th><th>Emphasis</th>
            </tr>
        </thead>
        <tbody>{rows}</tbody>
    </table>
    """


def _object_row(score: ObjectScore, category: str, gamma_o: float, gamma_c: float) -> str:
    consistent = score.index_consistency is None or score.index_consistency >= gamma_c
    if score.status != STATUS_SCORED:
        verdict = f'<span class="muted">{escape(score.status)}</span>'
    elif score.s_obj is not None and score.s_obj >= gamma_o and consistent:
        verdict = _badge(DECISION_STYLES, PASS)
    else:
        verdict = _badge(DECISION_STYLES, REFINE)
    return f"""
    <tr>
        <td>#{score.index}</td>
        <td>{escape(category)}</td>
        <td>{_fmt(score.s_obj)}</td>
        <td>{_fmt(score.semantic)}</td>
        <td>{_fmt(score.clarity)}</td>
        <td>{_fmt(score.index_consistency)}</td>
        <td>{score.crop_count}</td>
        <td>{verdict}</td>
    </tr>
    """


def _render_objects(report: Optional[AssessmentReport], scenario: Scenario) -> str:
    if report is None or not report.object_scores:
        return '<div class="card empty-state">No objects were assessed.</div>'

    gamma_o = report.thresholds.get("gamma_o", 0.0)
    gamma_c = report.thresholds.get("gamma_c", 0.0)
    rows = ""
    for index in sorted(report.object_scores):
        spec = scenario.object_by_index(index)
        rows += _object_row(report.object_scores[index], spec.category if spec else "?", gamma_o, gamma_c)
    return f"""
    <table>
        <thead>
            <tr>
                <th>Object</th><th>Category</th><th>Score</th><th>Semantic</th>
                <th>Clarity</th><th>Index consistency</th><th>Crops</th><th>Verdict</th>
            </tr>
        </thead>
        <tbody>{rows}</tbody>
    </table>
    """


def _render_macro(report: Optional[AssessmentReport]) -> str:
    if report is None:
        return ""
    tiles = "".join(
        f"""
        <div class="metric-tile">
            <div class="metric-label">{escape(name)}</div>
            <div class="metric-value">{_fmt(value)}</div>
        </div>
        """
        for name, value in sorted(report.per_attribute_macro.items())
    )
    return f'<div class="tile-grid">{tiles}</div>'


def _render_metrics(metrics: MetricsReport) -> str:
    rows: List[tuple] = [
        ("Layout IoU (mean)", _fmt(metrics.layout_iou_mean)),
        ("AP@0.5", _fmt(metrics.ap_at_50)),
        ("Category accuracy", _fmt(metrics.category_accuracy)),
        ("Text alignment (mean)", _fmt(metrics.text_alignment_mean)),
        ("Image alignment (mean)", _fmt(metrics.image_alignment_mean)),
        ("Index consistency (mean)", _fmt(metrics.index_consistency_mean)),
        ("Weather accuracy", _fmt(metrics.weather_accuracy)),
        ("Time-of-day accuracy", _fmt(metrics.time_accuracy)),
    ]
    body = "".join(f"<tr><td>{escape(name)}</td><td>{value}</td></tr>" for name, value in rows)
    excluded = ""
    if metrics.excluded_objects:
        listing = ", ".join(f"#{index}" for index in metrics.excluded_objects)
        excluded = f'<p class="muted">Never visible, excluded from layout metrics: {escape(listing)}</p>'
    return f"""
    <table class="narrow">
        <tbody>{body}</tbody>
    </table>
    {excluded}
    """


def build_report_html(
    log: AuditLog,
    metrics: MetricsReport,
    scenario: Scenario,
    title: str = "Scene generation run",
) -> str:
    status_style = STATUS_STYLES.get(log.status, STATUS_STYLES[STATUS_BUDGET_EXHAUSTED])
    final = log.final_report
    generated_at = datetime.now().strftime("%Y-%m-%d %H:%M")
    conditions = scenario.global_conditions

    return f"""
    <!doctype html>
    <html>
    <head>
        <meta charset="utf-8">
        <style>
            :root {{
                --primary: #2563eb;
                --bg: #f8fafc;
                --card: #ffffff;
                --text: #0f172a;
                --muted: #64748b;
                --line: #e2e8f0;
                --shadow: 0 12px 30px rgba(15, 23, 42, 0.06);
            }}

            * {{
                box-sizing: border-box;
            }}

            body {{
                margin: 0;
                padding: 34px 18px;
                background: var(--bg);
                color: var(--text);
                font-family: system-ui, -apple-system, BlinkMacSystemFont, "Segoe UI", sans-serif;
                line-height: 1.55;
            }}

            .report {{
                max-width: 960px;
                margin: 0 auto;
            }}

            .header,
            .overview,
            .card,
            table {{
                background: var(--card);
                border: 1px solid var(--line);
                border-radius: 14px;
                box-shadow: var(--shadow);
            }}

            .header {{
                padding: 30px;
                text-align: center;
            }}

            .product {{
                color: var(--primary);
                font-size: 12px;
                font-weight: 800;
                letter-spacing: 0.08em;
                text-transform: uppercase;
            }}

            .header h1 {{
                margin: 8px 0;
                font-size: 30px;
            }}

            .generated,
            .muted {{
                color: var(--muted);
                font-size: 12px;
            }}

            .overview {{
                margin-top: 18px;
                padding: 24px;
                display: grid;
                grid-template-columns: repeat(4, minmax(0, 1fr));
                gap: 14px;
            }}

            .tile-grid {{
                display: grid;
                grid-template-columns: repeat(auto-fit, minmax(160px, 1fr));
                gap: 14px;
            }}

            .metric-tile {{
                padding: 16px;
                border-radius: 12px;
                background: #f8fafc;
                border: 1px solid var(--line);
                text-align: center;
            }}

            .metric-label {{
                color: var(--muted);
                font-size: 12px;
                font-weight: 700;
                letter-spacing: 0.06em;
                text-transform: uppercase;
            }}

            .metric-value {{
                margin-top: 6px;
                font-size: 26px;
                font-weight: 800;
            }}

            .badge {{
                display: inline-block;
                padding: 3px 10px;
                border: 1px solid;
                border-radius: 999px;
                font-size: 12px;
                font-weight: 700;
            }}

            .section {{
                margin-top: 26px;
            }}

            .section h2 {{
                margin: 0 0 4px;
                font-size: 20px;
            }}

            .section-copy {{
                margin: 0 0 12px;
                color: var(--muted);
                font-size: 14px;
            }}

            table {{
                width: 100%;
                border-collapse: separate;
                border-spacing: 0;
                overflow: hidden;
                font-size: 13px;
            }}

            table.narrow {{
                max-width: 480px;
            }}

            th, td {{
                padding: 9px 12px;
                border-bottom: 1px solid var(--line);
                text-align: left;
            }}

            th {{
                background: #f1f5f9;
                color: var(--muted);
                font-size: 11px;
                text-transform: uppercase;
                letter-spacing: 0.05em;
            }}

            .card {{
                padding: 20px;
            }}

            .empty-state {{
                color: var(--muted);
                text-align: center;
            }}

            .footer {{
                margin-top: 28px;
                color: #94a3b8;
                font-size: 12px;
                text-align: center;
            }}
        </style>
    </head>
    <body>
        <main class="report">
            <header class="header">
                <div class="product">VISTALOOP</div>
                <h1>{escape(title)}</h1>
                <div>{_badge(STATUS_STYLES, log.status)}</div>
                <div class="generated">Generated {escape(generated_at)} - seed {log.seed}</div>
            </header>

            <section class="overview">
                <div class="metric-tile">
                    <div class="metric-label">Final macro score</div>
                    <div class="metric-value">{_fmt(final.s_macro if final else None)}</div>
                </div>
                <div class="metric-tile">
                    <div class="metric-label">Iterations</div>
                    <div class="metric-value">{len(log.iterations)} / {log.max_iterations}</div>
                </div>
                <div class="metric-tile">
                    <div class="metric-label">Conditions</div>
                    <div class="metric-value">{escape(conditions.weather)} / {escape(conditions.time_of_day)}</div>
                </div>
                <div class="metric-tile">
                    <div class="metric-label">Status</div>
                    <div class="metric-value" style="color:{status_style["color"]};">{escape(status_style["label"])}</div>
                </div>
            </section>

            <section class="section">
                <h2>Loop Audit</h2>
                <p class="section-copy">One row per iteration: scores, routing decision and refinement outcome.</p>
                {_render_iterations(log)}
            </section>

            <section class="section">
                <h2>Scene Conditions</h2>
                <p class="section-copy">Per-attribute macro scores from the final assessment.</p>
                {_render_macro(final)}
            </section>

            <section class="section">
                <h2>Object Scores</h2>
                <p class="section-copy">Semantic agreement, clarity and cross-frame identity per object.</p>
                {_render_objects(final, scenario)}
            </section>

            <section class="section">
                <h2>Metrics</h2>
                <p class="section-copy">Computed on the final video ({escape(metrics.mode.replace("_", " "))}).</p>
                {_render_metrics(metrics)}
            </section>

            <div class="footer">Scores are deterministic for a given scenario, seed and configuration.</div>
        </main>
    </body>
    </html>
    """
