from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Tuple

from core.validation import ConfigError


W_MAX = 8.0
MIN_CROP_AREA = 16.0
MAX_ITERATIONS_CAP = 32
THREADS_ENV_VAR = "VISTALOOP_THREADS"


@dataclass(frozen=True)
class EncoderConfig:
    d_e: int = 64
    d_tok: int = 32
    d_vis: int = 27
    feature_blocks: Tuple[int, ...] = (3, 16, 8)
    k_freq: int = 4
    fusion_seed: int = 0xC0FFEE
    visual_head_seed: int = 0xFACE
    condition_head_seed: int = 0xBEEF
    shared_dim: int = 32

    @property
    def d_geo(self) -> int:
        return 2 * self.k_freq * 7

    @property
    def fusion_fan_in(self) -> int:
        return self.d_geo + self.d_tok + self.d_vis


ENCODER_CONFIG = EncoderConfig()


@dataclass(frozen=True)
class LoopConfig:
    gamma_g: float = 0.8
    gamma_o: float = 0.7
    gamma_c: float = 0.9
    lam: float = 0.6
    alpha: float = 2.0
    max_iterations: int = 5
    seed: int = 42
    feather_px: int = 2
    apply_faults: bool = True
    export_masks: bool = False
    open_loop: bool = False
    local_conditions: bool = True
    refine: bool = True

    def __post_init__(self) -> None:
        for name in ("gamma_g", "gamma_o", "gamma_c", "lam"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {value}")
        if not self.alpha > 1.0:
            raise ConfigError(f"alpha must be greater than 1, got {self.alpha}")
        if not 1 <= self.max_iterations <= MAX_ITERATIONS_CAP:
            raise ConfigError(
                f"max_iterations must lie in [1, {MAX_ITERATIONS_CAP}], got {self.max_iterations}"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.feather_px < 0:
            raise ConfigError(f"feather must be non-negative, got {self.feather_px}")

    @classmethod
    def from_flags(cls, flags: Any) -> "LoopConfig":
        return cls(
            gamma_g=flags.gamma_g,
            gamma_o=flags.gamma_o,
            gamma_c=flags.gamma_c,
            lam=flags.lam,
            alpha=flags.alpha,
            max_iterations=flags.max_iters,
            seed=flags.seed,
            feather_px=flags.feather,
            apply_faults=not flags.no_faults,
            export_masks=flags.export_masks,
            open_loop=getattr(flags, "open_loop", False),
            local_conditions=not getattr(flags, "no_local", False),
            refine=not getattr(flags, "no_refine", False),
        )

    @property
    def mode(self) -> str:
        """Run label recorded in metrics, e.g. "closed_loop+no_refine"."""
        parts = ["open_loop" if self.open_loop else "closed_loop"]
        if not self.local_conditions:
            parts.append("no_local")
        if not self.refine:
            parts.append("no_refine")
        return "+".join(parts)


def worker_count(environ: Optional[Mapping[str, str]] = None) -> int:
    env = os.environ if environ is None else environ
    raw = env.get(THREADS_ENV_VAR, "0").strip() or "0"
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got '{raw}'") from None

    if value < 0:
        raise ConfigError(f"{THREADS_ENV_VAR} must be >= 0, got {value}")
    if value == 0:
        return os.cpu_count() or 1
    return value
