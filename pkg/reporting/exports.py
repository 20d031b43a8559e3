from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from core.condition_encoder import ConditionSet
from core.generator import Frame, MultiviewVideo, posed_cameras
from core.image_io import read_pgm, read_rgb, write_json, write_pgm8, write_pgm16, write_ppm
from core.refiner import make_masks
from core.scene_model import Scenario
from core.validation import ContractError


logger = logging.getLogger(__name__)

AUDIT_FILE = "audit.json"
REPORT_FILE = "report.json"
METRICS_FILE = "metrics.json"


def frame_name(view: int, frame_index: int) -> str:
    return f"view{view}_frame{frame_index}.ppm"


def ids_name(view: int, frame_index: int) -> str:
    return f"view{view}_frame{frame_index}_ids.pgm"


def mask_name(view: int, frame_index: int, object_index: int) -> str:
    return f"view{view}_frame{frame_index}_mask{object_index}.pgm"


def export_frames(video: MultiviewVideo, out_dir: Path) -> List[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for v, t, frame in video.cells():
        image_path = out_dir / frame_name(v, t)
        write_ppm(image_path, frame.pixels)
        write_pgm16(out_dir / ids_name(v, t), frame.instance_ids)
        written.append(image_path)
    logger.info("Wrote %d frames to %s", len(written), out_dir)
    return written


def export_masks(video: MultiviewVideo, conditions: ConditionSet, out_dir: Path) -> List[Path]:
    """Debug masks of every object the loop refined, 255 inside the projected hull."""
    written = []
    for index in video.refined_objects:
        masks = make_masks(conditions.spec_for(index), video.cameras)
        for (v, t), mask in sorted(masks.masks.items()):
            path = out_dir / mask_name(v, t, index)
            write_pgm8(path, mask.astype(np.uint8) * 255)
            written.append(path)
    return written


def export_json(out_dir: Path, name: str, payload: Dict[str, Any]) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    write_json(path, payload)
    logger.info("Wrote %s", path)
    return path


def load_video(
    run_dir: Path,
    scenario: Scenario,
    conditions: ConditionSet,
    seed: int,
) -> MultiviewVideo:
    """Rebuild a video from exported frames; cameras are re-posed from the scenario."""
    cameras = posed_cameras(conditions, scenario.rig, scenario.num_frames)
    rows = []
    for v, row in enumerate(cameras):
        frames = []
        for t, camera in enumerate(row):
            pixels = read_rgb(run_dir / frame_name(v, t))
            ids_path = run_dir / ids_name(v, t)
            instance_ids = read_pgm(ids_path) if ids_path.exists() else np.zeros(pixels.shape[:2], np.int32)
            if pixels.shape[:2] != (camera.height, camera.width):
                raise ContractError(
                    f"{frame_name(v, t)} is {pixels.shape[1]}x{pixels.shape[0]}, "
                    f"camera {v} expects {camera.width}x{camera.height}"
                )
            frames.append(Frame(pixels=pixels.copy(), instance_ids=instance_ids, view=v, frame_index=t))
        rows.append(tuple(frames))
    return MultiviewVideo(
        frames=tuple(rows),
        cameras=cameras,
        seed=seed,
        conditions_fingerprint=conditions.fingerprint(),
    )
