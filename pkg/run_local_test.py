from pathlib import Path

from cli import execute_run, write_run
from core.config import LoopConfig
from core.scenario_loader import load_scenario
from reporting.report_builder import build_report_html


scenario = load_scenario("demo_wrong_color")
config = LoopConfig(export_masks=True)
result = execute_run(scenario, config)

out_dir = Path("out")
write_run(result, scenario, config, out_dir, html=False)
html = build_report_html(result.log, result.metrics, scenario, "Demo: wrong color on the lead car")

with open("report.html", "w", encoding="utf-8") as f:
    f.write(html)

print("Generated report.html - open it in your browser.")
print("Status:", result.log.status, "Iterations:", len(result.log.iterations))
print("Final macro score:", f"{result.log.final_report.s_macro:.3f}")
print("AP@0.5:", f"{result.metrics.ap_at_50:.3f}", "Layout IoU:", f"{result.metrics.layout_iou_mean:.3f}")
