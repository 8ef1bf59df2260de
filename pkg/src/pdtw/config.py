"""Pipeline configuration: defaults, key=value files, validation."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import BadConfig

# Defaults of the published system setup.
ALPHA = 0.001
WINDOW_FRAMES = 20      # L
SHIFT_FRAMES = 10       # S
DOWNSAMPLE_FRAMES = 4   # M
KNN = 5                 # k
EXPAND_FRAMES = 25      # E
MIN_PATH_STEPS = 5      # L_min, 50 ms at 10 ms frames
CALIB_SAMPLES = 1_000_000
VAD_THRESHOLD = 0.01

_CHOICES = {
    "feature_source": ("mfcc", "files"),
    "normalization_scope": ("per-file", "per-corpus"),
    "dtw_cost_mode": ("raw", "log"),
    "vad_larger": ("weight", "mean"),
}


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = ALPHA
    L: int = WINDOW_FRAMES
    S: int = SHIFT_FRAMES
    M: int = DOWNSAMPLE_FRAMES
    k: int = KNN
    E: int = EXPAND_FRAMES
    L_min: int = MIN_PATH_STEPS
    n_calib_samples: int = CALIB_SAMPLES
    vad_threshold: float = VAD_THRESHOLD
    vad_enabled: bool = True
    vad_larger: str = "weight"
    vad_on_normalized: bool = False
    rng_seed: int = 0
    thread_count: int = 1
    feature_source: str = "mfcc"
    normalization_scope: str = "per-file"
    dtw_cost_mode: str = "raw"
    csv_frame_shift: float = 0.010

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise BadConfig(f"alpha must lie in (0, 1), got {self.alpha}")
        for name in ("L", "S", "M", "k", "L_min", "n_calib_samples", "thread_count"):
            if getattr(self, name) < 1:
                raise BadConfig(f"{name} must be positive")
        if self.E < 0:
            raise BadConfig("E must be non-negative")
        if self.M > self.L:
            raise BadConfig(f"M={self.M} exceeds L={self.L}")
        if self.S > self.L:
            raise BadConfig(f"S={self.S} exceeds L={self.L}")
        if not 0.0 < self.vad_threshold < 1.0:
            raise BadConfig("vad_threshold must lie in (0, 1)")
        if self.n_calib_samples < 1000:
            raise BadConfig("n_calib_samples must be >= 1000")
        for name, allowed in _CHOICES.items():
            if getattr(self, name) not in allowed:
                raise BadConfig(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")

    def with_overrides(self, **kw) -> "PipelineConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        unknown = set(kw) - {f.name for f in fields(self)}
        if unknown:
            raise BadConfig(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return replace(self, **kw)

    def as_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in fields(self))


def _coerce(name: str, raw: str, typ):
    if typ in (bool, "bool"):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise BadConfig(f"{name}: expected a boolean, got {raw!r}")
    try:
        return {"int": int, "float": float, "str": str}.get(typ, typ)(raw.strip())
    except ValueError as exc:
        raise BadConfig(f"{name}: {exc}") from exc


def load_config(path, base: PipelineConfig | None = None) -> PipelineConfig:
    """Read a flat ``key=value`` file; ``#`` starts a comment."""
    base = base or PipelineConfig()
    types = {f.name: f.type for f in fields(PipelineConfig)}
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadConfig(f"{path}:{lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise BadConfig(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw, types[key])
    return base.with_overrides(**values)
