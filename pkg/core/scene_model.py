from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.config import W_MAX
from core.image_io import read_rgb
from core.validation import (
    ScenarioSemanticError,
    ScenarioSyntaxError,
    VocabularyError,
    axis_outside,
    is_orthonormal,
)
from modules.vocabulary import GLOBAL_ATTRIBUTES, require_token


Vec3 = Tuple[float, float, float]

GLOBAL_FAULT_KINDS = ("weather_tint",)
OBJECT_FAULT_KINDS = ("wrong_color", "blur_object", "drop_object", "jitter_box")
FAULT_KINDS = GLOBAL_FAULT_KINDS + OBJECT_FAULT_KINDS
MAX_REFERENCE_SIZE = 64


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    wrapped = math.fmod(yaw + math.pi, 2.0 * math.pi)
    if wrapped < 0.0:
        wrapped += 2.0 * math.pi
    result = wrapped - math.pi
    return -math.pi if result >= math.pi else result


@dataclass(frozen=True)
class EgoPose:
    frame: int
    x: float
    y: float
    yaw: float


@dataclass(frozen=True)
class BoxPose3D:
    center: Vec3
    size: Vec3
    yaw: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "size", tuple(float(v) for v in self.size))
        object.__setattr__(self, "yaw", normalize_yaw(float(self.yaw)))

    def corners(self) -> np.ndarray:
        """8x3 world-space corners; bottom face first, counter-clockwise from front-left."""
        length, width, height = self.size
        dx, dy = length / 2.0, width / 2.0
        local = np.array(
            [
                [dx, dy, 0.0],
                [-dx, dy, 0.0],
                [-dx, -dy, 0.0],
                [dx, -dy, 0.0],
                [dx, dy, height],
                [-dx, dy, height],
                [-dx, -dy, height],
                [dx, -dy, height],
            ]
        )
        local[:, 2] -= height / 2.0
        return local_to_world(local, self.center, self.yaw)


def local_to_world(points: np.ndarray, center: Sequence[float], yaw: float) -> np.ndarray:
    cos_yaw, sin_yaw = math.cos(yaw), math.sin(yaw)
    rotation = np.array([[cos_yaw, -sin_yaw, 0.0], [sin_yaw, cos_yaw, 0.0], [0.0, 0.0, 1.0]])
    return points @ rotation.T + np.asarray(center, dtype=float)


@dataclass(frozen=True)
class GlobalConditions:
    weather: str
    time_of_day: str
    ego_trajectory: Tuple[EgoPose, ...]
    road_map: Tuple[Tuple[Tuple[float, float], ...], ...]
    emphasis_weights: Tuple[Tuple[str, float], ...] = (("time_of_day", 1.0), ("weather", 1.0))

    @property
    def weights(self) -> Dict[str, float]:
        return dict(self.emphasis_weights)

    def weight(self, attribute: str) -> float:
        return self.weights.get(attribute, 1.0)

    def ego_pose(self, frame: int) -> EgoPose:
        for pose in self.ego_trajectory:
            if pose.frame == frame:
                return pose
        return EgoPose(frame=frame, x=0.0, y=0.0, yaw=0.0)


def weights_tuple(weights: Mapping[str, float]) -> Tuple[Tuple[str, float], ...]:
    merged = {attribute: 1.0 for attribute in GLOBAL_ATTRIBUTES}
    merged.update({key: float(value) for key, value in weights.items()})
    return tuple(sorted(merged.items()))


@dataclass(frozen=True)
class ObjectSpec:
    index: int
    category: str
    color: str
    style_tokens: Tuple[str, ...]
    size: Vec3
    keyframes: Tuple[Tuple[int, BoxPose3D], ...]
    reference_path: Optional[str] = None
    reference_appearance: Optional[np.ndarray] = field(
        default=None, compare=False, hash=False, repr=False
    )

    @property
    def first_frame(self) -> int:
        return self.keyframes[0][0]

    @property
    def last_frame(self) -> int:
        return self.keyframes[-1][0]

    @property
    def trajectory(self) -> Dict[int, BoxPose3D]:
        return dict(self.keyframes)

    def mid_frame(self) -> int:
        return (self.first_frame + self.last_frame) // 2


@dataclass(frozen=True)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: Tuple[float, ...]
    translation: Vec3
    near: float = 0.1

    def rotation_matrix(self) -> np.ndarray:
        return np.asarray(self.rotation, dtype=float).reshape(3, 3)

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation_matrix().T + np.asarray(
            self.translation, dtype=float
        )

    def posed(self, ego: EgoPose) -> "Camera":
        """Compose the ego-mounted extrinsic with the ego pose into world->camera."""
        cos_yaw, sin_yaw = math.cos(ego.yaw), math.sin(ego.yaw)
        ego_rotation = np.array(
            [[cos_yaw, -sin_yaw, 0.0], [sin_yaw, cos_yaw, 0.0], [0.0, 0.0, 1.0]]
        )
        rotation = self.rotation_matrix() @ ego_rotation.T
        translation = np.asarray(self.translation, dtype=float) - rotation @ np.array(
            [ego.x, ego.y, 0.0]
        )
        return Camera(
            fx=self.fx,
            fy=self.fy,
            cx=self.cx,
            cy=self.cy,
            width=self.width,
            height=self.height,
            rotation=tuple(float(v) for v in rotation.reshape(-1)),
            translation=tuple(float(v) for v in translation),
            near=self.near,
        )


@dataclass(frozen=True)
class SceneBounds:
    min: Vec3
    max: Vec3


@dataclass(frozen=True)
class FaultSpec:
    kind: str
    target: Optional[int]
    deactivation_weight: float
    severity: float


@dataclass(frozen=True)
class Scenario:
    global_conditions: GlobalConditions
    objects: Tuple[ObjectSpec, ...]
    rig: Tuple[Camera, ...]
    num_frames: int
    scene_bounds: SceneBounds
    fault_plan: Tuple[FaultSpec, ...] = ()

    def object_by_index(self, index: int) -> Optional[ObjectSpec]:
        for spec in self.objects:
            if spec.index == index:
                return spec
        return None


def box_at(spec: ObjectSpec, frame: int) -> Optional[BoxPose3D]:
    if frame < spec.first_frame or frame > spec.last_frame:
        return None

    keyframes = spec.keyframes
    for (frame_a, box_a), (frame_b, box_b) in zip(keyframes, keyframes[1:]):
        if frame_a <= frame <= frame_b:
            break
    else:
        return keyframes[0][1] if frame == keyframes[0][0] else None

    if frame == frame_a:
        return box_a
    if frame == frame_b:
        return box_b

    t = (frame - frame_a) / (frame_b - frame_a)
    center = tuple(a + t * (b - a) for a, b in zip(box_a.center, box_b.center))
    size = tuple(a + t * (b - a) for a, b in zip(box_a.size, box_b.size))
    # Shortest arc: the wrapped difference always lies in [-pi, pi).
    delta = normalize_yaw(box_b.yaw - box_a.yaw)
    return BoxPose3D(center=center, size=size, yaw=box_a.yaw + t * delta)


# ---------------------------------------------------------------------------
# Invariant predicates. Pure: they only read the scenario and return messages.
# ---------------------------------------------------------------------------


def _global_violations(scenario: Scenario) -> List[str]:
    messages: List[str] = []
    conditions = scenario.global_conditions
    frames = [pose.frame for pose in conditions.ego_trajectory]
    seen = set()
    for frame in frames:
        if frame in seen:
            messages.append(f"global.ego_trajectory: duplicate frame {frame}")
        seen.add(frame)
    for frame in range(scenario.num_frames):
        if frame not in seen:
            messages.append(f"global.ego_trajectory: missing frame {frame}")
    for frame in sorted(seen):
        if not 0 <= frame < scenario.num_frames:
            messages.append(
                f"global.ego_trajectory: frame {frame} outside [0, {scenario.num_frames})"
            )

    for attribute, weight in conditions.emphasis_weights:
        if attribute not in GLOBAL_ATTRIBUTES:
            messages.append(f"global.emphasis_weights: unknown attribute '{attribute}'")
        elif not 1.0 <= weight <= W_MAX:
            messages.append(
                f"global.emphasis_weights.{attribute}: {weight} outside [1.0, {W_MAX}]"
            )
    return messages


def _object_violations(scenario: Scenario) -> List[str]:
    messages: List[str] = []
    seen_indices = set()
    bounds = scenario.scene_bounds
    for position, spec in enumerate(scenario.objects):
        prefix = f"objects[{position}]"
        if spec.index < 0:
            messages.append(f"{prefix}.index: must be non-negative, got {spec.index}")
        if spec.index in seen_indices:
            messages.append(f"duplicate object index {spec.index}")
        seen_indices.add(spec.index)

        if any(component <= 0.0 for component in spec.size):
            messages.append(f"{prefix}.size: components must be strictly positive")
        if not spec.keyframes:
            messages.append(f"{prefix}.trajectory: empty")
            continue

        previous = None
        for key_position, (frame, box) in enumerate(spec.keyframes):
            field_name = f"{prefix}.trajectory[{key_position}]"
            if previous is not None and frame <= previous:
                messages.append(
                    f"{field_name}.frame: trajectory gap or repeat at frame {frame}"
                )
            previous = frame
            if not 0 <= frame < scenario.num_frames:
                messages.append(
                    f"{field_name}.frame: {frame} outside [0, {scenario.num_frames})"
                )
            axis = axis_outside(box.center, bounds.min, bounds.max)
            if axis is not None:
                messages.append(f"{field_name}: center outside scene_bounds on axis {axis}")
    return messages


def _rig_violations(scenario: Scenario) -> List[str]:
    messages: List[str] = []
    for position, camera in enumerate(scenario.rig):
        prefix = f"rig[{position}]"
        if not is_orthonormal(camera.rotation):
            messages.append(f"{prefix}.rotation: not orthonormal with determinant +1")
        if camera.fx <= 0 or camera.fy <= 0:
            messages.append(f"{prefix}: fx and fy must be positive")
        if camera.width < 1 or camera.height < 1:
            messages.append(f"{prefix}: width and height must be at least 1")
        if not 0 <= camera.cx < camera.width:
            messages.append(f"{prefix}.cx: {camera.cx} outside [0, {camera.width})")
        if not 0 <= camera.cy < camera.height:
            messages.append(f"{prefix}.cy: {camera.cy} outside [0, {camera.height})")
        if camera.near <= 0:
            messages.append(f"{prefix}.near: must be positive")
    return messages


def _fault_violations(scenario: Scenario) -> List[str]:
    messages: List[str] = []
    indices = {spec.index for spec in scenario.objects}
    for position, fault in enumerate(scenario.fault_plan):
        prefix = f"faults[{position}]"
        if fault.kind not in FAULT_KINDS:
            messages.append(f"{prefix}.kind: unknown fault kind '{fault.kind}'")
            continue
        if fault.kind in GLOBAL_FAULT_KINDS and fault.target is not None:
            messages.append(f"{prefix}.target: {fault.kind} must target global")
        if fault.kind in OBJECT_FAULT_KINDS:
            if fault.target is None:
                messages.append(f"{prefix}.target: {fault.kind} must target an object index")
            elif fault.target not in indices:
                messages.append(f"{prefix}.target: no object with index {fault.target}")
        if not 0.0 < fault.severity <= 1.0:
            messages.append(f"{prefix}.severity: {fault.severity} outside (0, 1]")
        if fault.deactivation_weight <= 0.0:
            messages.append(f"{prefix}.deactivation_weight: must be positive")
    return messages


def scenario_violations(scenario: Scenario) -> List[str]:
    messages: List[str] = []
    if scenario.num_frames < 1:
        messages.append("num_frames: must be at least 1")
    if not scenario.rig:
        messages.append("rig: at least one camera is required")
    bounds = scenario.scene_bounds
    for axis, low, high in zip("xyz", bounds.min, bounds.max):
        if not low < high:
            messages.append(f"scene_bounds: min must be below max on axis {axis}")

    messages.extend(_global_violations(scenario))
    messages.extend(_object_violations(scenario))
    messages.extend(_rig_violations(scenario))
    messages.extend(_fault_violations(scenario))
    return messages


def validate_scenario(scenario: Scenario) -> Scenario:
    messages = scenario_violations(scenario)
    if messages:
        raise ScenarioSemanticError(messages[0])
    return scenario


# ---------------------------------------------------------------------------
# Scenario file format
# ---------------------------------------------------------------------------


def _require(mapping: Any, key: str, path: str) -> Any:
    if not isinstance(mapping, dict):
        raise ScenarioSyntaxError(f"{path}: expected an object")
    if key not in mapping:
        raise ScenarioSyntaxError(f"{path}.{key}: missing required key")
    return mapping[key]


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioSyntaxError(f"{path}: expected a number")
    number = float(value)
    if not math.isfinite(number):
        raise ScenarioSyntaxError(f"{path}: expected a finite number")
    return number


def _integer(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioSyntaxError(f"{path}: expected an integer")
    return int(value)


def _list(value: Any, path: str, length: Optional[int] = None) -> List[Any]:
    if not isinstance(value, list):
        raise ScenarioSyntaxError(f"{path}: expected a list")
    if length is not None and len(value) != length:
        raise ScenarioSyntaxError(f"{path}: expected {length} entries, got {len(value)}")
    return value


def _token(vocabulary: str, value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise ScenarioSyntaxError(f"{path}: expected a string token")
    try:
        return require_token(vocabulary, value)
    except VocabularyError as exc:
        raise VocabularyError(f"{path}: {exc}") from None


def _vec(value: Any, path: str) -> Vec3:
    items = _list(value, path, 3)
    return tuple(_number(item, f"{path}[{i}]") for i, item in enumerate(items))  # type: ignore[return-value]


def _parse_global(raw: Any) -> GlobalConditions:
    path = "global"
    weather = _token("weather", _require(raw, "weather", path), f"{path}.weather")
    time_of_day = _token("time_of_day", _require(raw, "time_of_day", path), f"{path}.time_of_day")

    ego: List[EgoPose] = []
    for i, entry in enumerate(_list(_require(raw, "ego_trajectory", path), f"{path}.ego_trajectory")):
        entry_path = f"{path}.ego_trajectory[{i}]"
        ego.append(
            EgoPose(
                frame=_integer(_require(entry, "frame", entry_path), f"{entry_path}.frame"),
                x=_number(_require(entry, "x", entry_path), f"{entry_path}.x"),
                y=_number(_require(entry, "y", entry_path), f"{entry_path}.y"),
                yaw=_number(_require(entry, "yaw", entry_path), f"{entry_path}.yaw"),
            )
        )

    road_map = []
    for i, polyline in enumerate(_list(raw.get("road_map", []), f"{path}.road_map")):
        line_path = f"{path}.road_map[{i}]"
        points = []
        for j, point in enumerate(_list(polyline, line_path)):
            x, y = _list(point, f"{line_path}[{j}]", 2)
            points.append((_number(x, f"{line_path}[{j}][0]"), _number(y, f"{line_path}[{j}][1]")))
        road_map.append(tuple(points))

    raw_weights = raw.get("emphasis_weights", {})
    if not isinstance(raw_weights, dict):
        raise ScenarioSyntaxError(f"{path}.emphasis_weights: expected an object")
    weights = {
        str(key): _number(value, f"{path}.emphasis_weights.{key}")
        for key, value in raw_weights.items()
    }

    return GlobalConditions(
        weather=weather,
        time_of_day=time_of_day,
        ego_trajectory=tuple(sorted(ego, key=lambda pose: pose.frame)),
        road_map=tuple(road_map),
        emphasis_weights=weights_tuple(weights),
    )


def _load_reference(reference: str, path: str, base_dir: Optional[Path]) -> np.ndarray:
    location = Path(reference)
    if not location.is_absolute() and base_dir is not None:
        location = base_dir / location
    try:
        pixels = read_rgb(location)
    except OSError as exc:
        raise ScenarioSemanticError(f"{path}: cannot read reference image: {exc}") from None
    height, width = pixels.shape[:2]
    if height > MAX_REFERENCE_SIZE or width > MAX_REFERENCE_SIZE:
        raise ScenarioSemanticError(
            f"{path}: reference image {width}x{height} exceeds {MAX_REFERENCE_SIZE}x{MAX_REFERENCE_SIZE}"
        )
    return pixels


def _parse_object(raw: Any, position: int, base_dir: Optional[Path]) -> ObjectSpec:
    path = f"objects[{position}]"
    size = _vec(_require(raw, "size", path), f"{path}.size")
    keyframes = []
    for i, entry in enumerate(_list(_require(raw, "trajectory", path), f"{path}.trajectory")):
        entry_path = f"{path}.trajectory[{i}]"
        center = tuple(
            _number(_require(entry, axis, entry_path), f"{entry_path}.{axis}") for axis in "xyz"
        )
        yaw = _number(_require(entry, "yaw", entry_path), f"{entry_path}.yaw")
        frame = _integer(_require(entry, "frame", entry_path), f"{entry_path}.frame")
        keyframes.append((frame, BoxPose3D(center=center, size=size, yaw=yaw)))

    reference_path = raw.get("reference_appearance")
    if reference_path is not None and not isinstance(reference_path, str):
        raise ScenarioSyntaxError(f"{path}.reference_appearance: expected a path string")
    reference = (
        _load_reference(reference_path, f"{path}.reference_appearance", base_dir)
        if reference_path
        else None
    )

    styles = tuple(
        _token("style", token, f"{path}.style_tokens[{i}]")
        for i, token in enumerate(_list(raw.get("style_tokens", []), f"{path}.style_tokens"))
    )
    return ObjectSpec(
        index=_integer(_require(raw, "index", path), f"{path}.index"),
        category=_token("category", _require(raw, "category", path), f"{path}.category"),
        color=_token("color", _require(raw, "color", path), f"{path}.color"),
        style_tokens=styles,
        size=size,
        keyframes=tuple(keyframes),
        reference_path=reference_path or None,
        reference_appearance=reference,
    )


def _parse_camera(raw: Any, position: int) -> Camera:
    path = f"rig[{position}]"
    rotation = _list(_require(raw, "rotation", path), f"{path}.rotation", 9)
    return Camera(
        fx=_number(_require(raw, "fx", path), f"{path}.fx"),
        fy=_number(_require(raw, "fy", path), f"{path}.fy"),
        cx=_number(_require(raw, "cx", path), f"{path}.cx"),
        cy=_number(_require(raw, "cy", path), f"{path}.cy"),
        width=_integer(_require(raw, "width", path), f"{path}.width"),
        height=_integer(_require(raw, "height", path), f"{path}.height"),
        rotation=tuple(_number(v, f"{path}.rotation[{i}]") for i, v in enumerate(rotation)),
        translation=_vec(_require(raw, "translation", path), f"{path}.translation"),
        near=_number(_require(raw, "near", path), f"{path}.near"),
    )


def _parse_fault(raw: Any, position: int) -> FaultSpec:
    path = f"faults[{position}]"
    kind = _require(raw, "kind", path)
    if not isinstance(kind, str):
        raise ScenarioSyntaxError(f"{path}.kind: expected a string")
    target_raw = _require(raw, "target", path)
    target = None if target_raw == "global" else _integer(target_raw, f"{path}.target")
    default_weight = W_MAX if kind in OBJECT_FAULT_KINDS else None
    weight_raw = raw.get("deactivation_weight", default_weight)
    if weight_raw is None:
        raise ScenarioSyntaxError(f"{path}.deactivation_weight: missing required key")
    return FaultSpec(
        kind=kind,
        target=target,
        deactivation_weight=_number(weight_raw, f"{path}.deactivation_weight"),
        severity=_number(raw.get("severity", 1.0), f"{path}.severity"),
    )


def scenario_from_dict(raw: Any, base_dir: Optional[Path] = None) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioSyntaxError("scenario: expected a JSON object at top level")

    bounds_raw = _require(raw, "scene_bounds", "scenario")
    scenario = Scenario(
        global_conditions=_parse_global(_require(raw, "global", "scenario")),
        objects=tuple(
            _parse_object(entry, i, base_dir)
            for i, entry in enumerate(_list(raw.get("objects", []), "objects"))
        ),
        rig=tuple(
            _parse_camera(entry, i)
            for i, entry in enumerate(_list(_require(raw, "rig", "scenario"), "rig"))
        ),
        num_frames=_integer(_require(raw, "num_frames", "scenario"), "num_frames"),
        scene_bounds=SceneBounds(
            min=_vec(_require(bounds_raw, "min", "scene_bounds"), "scene_bounds.min"),
            max=_vec(_require(bounds_raw, "max", "scene_bounds"), "scene_bounds.max"),
        ),
        fault_plan=tuple(
            _parse_fault(entry, i) for i, entry in enumerate(_list(raw.get("faults", []), "faults"))
        ),
    )
    return validate_scenario(scenario)


def parse_scenario(text: str, base_dir: Optional[Path] = None) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioSyntaxError(
            f"line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    return scenario_from_dict(raw, base_dir)


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    conditions = scenario.global_conditions
    objects = []
    for spec in scenario.objects:
        entry: Dict[str, Any] = {
            "index": spec.index,
            "category": spec.category,
            "color": spec.color,
            "style_tokens": list(spec.style_tokens),
            "size": list(spec.size),
            "trajectory": [
                {"frame": frame, "x": box.center[0], "y": box.center[1], "z": box.center[2], "yaw": box.yaw}
                for frame, box in spec.keyframes
            ],
        }
        if spec.reference_path:
            entry["reference_appearance"] = spec.reference_path
        objects.append(entry)

    return {
        "global": {
            "weather": conditions.weather,
            "time_of_day": conditions.time_of_day,
            "ego_trajectory": [
                {"frame": pose.frame, "x": pose.x, "y": pose.y, "yaw": pose.yaw}
                for pose in conditions.ego_trajectory
            ],
            "road_map": [[list(point) for point in line] for line in conditions.road_map],
            "emphasis_weights": dict(conditions.emphasis_weights),
        },
        "objects": objects,
        "rig": [
            {
                "fx": camera.fx,
                "fy": camera.fy,
                "cx": camera.cx,
                "cy": camera.cy,
                "width": camera.width,
                "height": camera.height,
                "rotation": list(camera.rotation),
                "translation": list(camera.translation),
                "near": camera.near,
            }
            for camera in scenario.rig
        ],
        "num_frames": scenario.num_frames,
        "scene_bounds": {"min": list(scenario.scene_bounds.min), "max": list(scenario.scene_bounds.max)},
        "faults": [
            {
                "kind": fault.kind,
                "target": "global" if fault.target is None else fault.target,
                "deactivation_weight": fault.deactivation_weight,
                "severity": fault.severity,
            }
            for fault in scenario.fault_plan
        ],
    }


def serialize_scenario(scenario: Scenario) -> str:
    # repr-exact floats so parse(serialize(s)) == s field for field.
    return json.dumps(scenario_to_dict(scenario), indent=2) + "\n"
