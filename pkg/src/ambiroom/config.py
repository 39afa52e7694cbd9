"""Scenario configuration files (TOML).

Every section is validated against a fixed schema before any computation;
unknown sections or keys are rejected.  Paths are resolved relative to the
config file.  Example::

    [room]
    dimensions = [6, 5, 3]
    absorption = 0.4
    max_ism_order = 5
    sh_order = 3
    fs = 48000

    [[sources]]
    position = [4, 4, 1.5]
    signal = "dry.wav"        # optional

    [receiver]
    position = [2, 2, 1.5]

    [hrtf]
    path = "synthetic"        # or an HRTF container file
    mode = "magls"
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, GeometryError

__all__ = ["ScenarioConfig", "RoomConfig", "SourceConfig", "HrtfConfig", "ArrayConfig",
           "EncoderConfig", "RotationConfig", "EvalConfig", "BenchSection", "load_config",
           "parse_config"]


def _vec3(value, what):
    if not isinstance(value, (list, tuple)) or len(value) != 3 \
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ConfigError(f"{what} must be a list of three numbers")
    return tuple(float(v) for v in value)


def _number(value, what, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what} must be a number")
    if integer and int(value) != value:
        raise ConfigError(f"{what} must be an integer")
    if not math.isfinite(value) and not (value == math.inf and not integer):
        raise ConfigError(f"{what} must be finite")
    if positive and value <= 0:
        raise ConfigError(f"{what} must be positive")
    return int(value) if integer else float(value)


def _choice(value, what, options):
    if not isinstance(value, str) or value.lower() not in options:
        raise ConfigError(f"{what} must be one of {sorted(options)}")
    return value.lower()


def _flag(value, what):
    if not isinstance(value, bool):
        raise ConfigError(f"{what} must be true or false")
    return value


def _build(cls, table, section):
    """Instantiate dataclass ``cls`` from ``table``, rejecting unknown keys."""
    if not isinstance(table, dict):
        raise ConfigError(f"[{section}] must be a table")
    known = {f.name for f in fields(cls) if not f.name.startswith("_")}
    unknown = sorted(set(table) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")
    return cls(**table)


@dataclass
class RoomConfig:
    dimensions: tuple = (6.0, 5.0, 3.0)
    absorption: object = 0.4
    max_ism_order: int = 5
    sh_order: int = 3
    fs: float = 48000.0
    c: float = 343.0

    def __post_init__(self):
        self.dimensions = _vec3(self.dimensions, "room.dimensions")
        if min(self.dimensions) <= 0:
            raise GeometryError("room dimensions must be positive")
        if isinstance(self.absorption, list):
            if len(self.absorption) != 6:
                raise ConfigError("room.absorption must be one number or six")
            self.absorption = tuple(_number(a, "room.absorption") for a in self.absorption)
            values = self.absorption
        else:
            self.absorption = _number(self.absorption, "room.absorption")
            values = (self.absorption,)
        if any(not 0 <= a < 1 for a in values):
            raise ConfigError("room.absorption must lie in [0, 1)")
        self.max_ism_order = _number(self.max_ism_order, "room.max_ism_order", integer=True)
        self.sh_order = _number(self.sh_order, "room.sh_order", integer=True)
        if self.max_ism_order < 0 or self.sh_order < 0:
            raise ConfigError("orders must be nonnegative")
        self.fs = _number(self.fs, "room.fs", positive=True)
        self.c = _number(self.c, "room.c", positive=True)


@dataclass
class SourceConfig:
    position: tuple = None
    signal: str | None = None

    def __post_init__(self):
        if self.position is None:
            raise ConfigError("every source needs a position")
        self.position = _vec3(self.position, "sources.position")
        if self.signal is not None and not isinstance(self.signal, str):
            raise ConfigError("sources.signal must be a file path")


@dataclass
class ReceiverConfig:
    position: tuple = None

    def __post_init__(self):
        if self.position is None:
            raise ConfigError("receiver.position is required")
        self.position = _vec3(self.position, "receiver.position")


@dataclass
class HrtfConfig:
    path: str = "synthetic"
    mode: str = "magls"
    fc: float | None = None
    resample: bool = False

    def __post_init__(self):
        if not isinstance(self.path, str):
            raise ConfigError("hrtf.path must be a string")
        self.mode = _choice(self.mode, "hrtf.mode", {"ls", "magls"})
        if self.fc is not None:
            self.fc = _number(self.fc, "hrtf.fc", positive=True)
        self.resample = _flag(self.resample, "hrtf.resample")


@dataclass
class ArrayConfig:
    n_mics: int = 32
    radius: float = 0.042
    sphere: str = "rigid"
    source_model: str = "plane"
    sm_order: int | None = None
    source_distance: float = math.inf
    mask: bool = True

    def __post_init__(self):
        self.n_mics = _number(self.n_mics, "array.n_mics", positive=True, integer=True)
        self.radius = _number(self.radius, "array.radius", positive=True)
        self.sphere = _choice(self.sphere, "array.sphere", {"rigid", "open"})
        self.source_model = _choice(self.source_model, "array.source_model", {"plane", "point"})
        if self.sm_order is not None:
            self.sm_order = _number(self.sm_order, "array.sm_order", integer=True)
        self.source_distance = _number(self.source_distance, "array.source_distance",
                                       positive=True)
        self.mask = _flag(self.mask, "array.mask")


@dataclass
class EncoderConfig:
    type: str = "asm"
    eps: float | None = None
    lam: float = 1e-3
    magls_pre: bool = False
    fc: float | None = None

    def __post_init__(self):
        self.type = _choice(self.type, "encoder.type", {"asm", "bsm"})
        if self.eps is not None:
            self.eps = _number(self.eps, "encoder.eps")
            if self.eps < 0:
                raise ConfigError("encoder.eps must be nonnegative")
        self.lam = _number(self.lam, "encoder.lam", positive=True)
        self.magls_pre = _flag(self.magls_pre, "encoder.magls_pre")
        if self.fc is not None:
            self.fc = _number(self.fc, "encoder.fc", positive=True)


@dataclass
class RotationConfig:
    euler: tuple = (0.0, 0.0, 0.0)
    frames: int = 1
    sweep: bool = False
    cache_step_deg: float = 1.0     # orientation grid used by --cache-d

    def __post_init__(self):
        self.euler = _vec3(self.euler, "rotation.euler")
        self.frames = _number(self.frames, "rotation.frames", positive=True, integer=True)
        self.sweep = _flag(self.sweep, "rotation.sweep")
        self.cache_step_deg = _number(self.cache_step_deg, "rotation.cache_step_deg",
                                      positive=True)


@dataclass
class EvalConfig:
    reference_order: int | None = None
    reference: str | None = None
    candidate: str | None = None
    orders: tuple = (1, 3, 5, 7, 9)
    modes: tuple = ("ls", "magls")
    f_lo: float = 200.0
    f_hi: float = 20000.0
    smoothing: float = 1 / 6

    def __post_init__(self):
        if self.reference_order is None and self.reference is None:
            raise ConfigError("[eval] needs reference_order or a reference file")
        if self.reference_order is not None:
            self.reference_order = _number(self.reference_order, "eval.reference_order",
                                           integer=True)
        if (self.reference is None) != (self.candidate is None) and self.reference_order is None:
            raise ConfigError("eval.reference and eval.candidate go together")
        self.orders = tuple(_number(o, "eval.orders", integer=True) for o in self.orders)
        self.modes = tuple(_choice(m, "eval.modes", {"ls", "magls"}) for m in self.modes)
        self.f_lo = _number(self.f_lo, "eval.f_lo", positive=True)
        self.f_hi = _number(self.f_hi, "eval.f_hi", positive=True)
        if self.f_hi <= self.f_lo:
            raise ConfigError("eval.f_hi must exceed eval.f_lo")
        self.smoothing = _number(self.smoothing, "eval.smoothing", positive=True)


@dataclass
class BenchSection:
    suites: tuple = ("SH_ORDER", "ISM_ORDER", "SOURCES", "ROTATION")
    sh_orders: tuple = (1, 3, 5, 7, 9, 12)
    ism_orders: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    source_counts: tuple = (1, 2, 4, 8)
    n_frames: int = 600
    trials: int = 10
    full_euler: bool = False

    def __post_init__(self):
        from .bench import SUITES

        self.suites = tuple(_choice(s, "bench.suites", {x.lower() for x in SUITES}).upper()
                            for s in self.suites)
        for name in ("sh_orders", "ism_orders", "source_counts"):
            setattr(self, name, tuple(_number(v, f"bench.{name}", integer=True)
                                      for v in getattr(self, name)))
        self.n_frames = _number(self.n_frames, "bench.n_frames", positive=True, integer=True)
        self.trials = _number(self.trials, "bench.trials", positive=True, integer=True)
        self.full_euler = _flag(self.full_euler, "bench.full_euler")


_SECTIONS = {"room": RoomConfig, "receiver": ReceiverConfig, "hrtf": HrtfConfig,
             "array": ArrayConfig, "encoder": EncoderConfig, "rotation": RotationConfig,
             "eval": EvalConfig, "bench": BenchSection}


@dataclass
class ScenarioConfig:
    room: RoomConfig = field(default_factory=RoomConfig)
    sources: list = field(default_factory=list)
    receiver: ReceiverConfig | None = None
    hrtf: HrtfConfig | None = None
    array: ArrayConfig | None = None
    encoder: EncoderConfig | None = None
    rotation: RotationConfig | None = None
    eval: EvalConfig | None = None
    bench: BenchSection | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def require_scene(self):
        if not self.sources:
            raise ConfigError("the scenario has no sources")
        if self.receiver is None:
            raise ConfigError("the scenario has no [receiver]")
        L = self.room.dimensions
        for what, p in [("receiver", self.receiver.position)] + \
                [(f"source {i}", s.position) for i, s in enumerate(self.sources)]:
            if any(not 0 < x < l for x, l in zip(p, L)):
                raise GeometryError(f"{what} {list(p)} is not strictly inside the room {list(L)}")

    def as_dict(self) -> dict:
        from dataclasses import asdict

        out = {}
        for name in ("room", "receiver", "hrtf", "array", "encoder", "rotation", "eval"):
            value = getattr(self, name)
            if value is not None:
                out[name] = asdict(value)
        out["sources"] = [asdict(s) for s in self.sources]
        return out


def parse_config(data: dict, base_dir=None) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table")
    unknown = sorted(set(data) - set(_SECTIONS) - {"sources"})
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    kwargs = {name: _build(cls, data[name], name) for name, cls in _SECTIONS.items()
              if name in data}
    sources = data.get("sources", [])
    if not isinstance(sources, list):
        raise ConfigError("sources must be an array of tables ([[sources]])")
    kwargs["sources"] = [_build(SourceConfig, s, "sources") for s in sources]
    cfg = ScenarioConfig(**kwargs)
    if base_dir is not None:
        cfg.base_dir = Path(base_dir)
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, path.parent)
