from __future__ import annotations

import json
from pathlib import Path
from typing import Dict

from core.scene_model import Scenario, parse_scenario
from core.validation import ScenarioSyntaxError


APP_ROOT = Path(__file__).resolve().parents[1]
SCENARIOS_ROOT = APP_ROOT / "scenarios"


def _title_from_key(key: str) -> str:
    return key.replace("_", " ").replace("-", " ").title()


def _describe(path: Path) -> str:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return _title_from_key(path.stem)
    title = raw.get("title") if isinstance(raw, dict) else None
    return title or _title_from_key(path.stem)


def list_scenarios() -> Dict[str, str]:
    """Bundled scenario key -> display title, in file-name order."""
    if not SCENARIOS_ROOT.exists():
        return {}
    return {path.stem: _describe(path) for path in sorted(SCENARIOS_ROOT.glob("*.json"))}


def scenario_path(name: str) -> Path:
    available = list_scenarios()
    if name not in available:
        listing = ", ".join(sorted(available)) or "none"
        raise ValueError(f"Unknown scenario '{name}'. Available scenarios: {listing}")
    return SCENARIOS_ROOT / f"{name}.json"


def load_scenario_file(path: Path) -> Scenario:
    """Parse a scenario file; reference images resolve relative to the file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Scenario file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ScenarioSyntaxError(f"{path}: not valid UTF-8 ({exc.reason})") from None
    return parse_scenario(text, base_dir=path.parent)


def load_scenario(name: str) -> Scenario:
    return load_scenario_file(scenario_path(name))
