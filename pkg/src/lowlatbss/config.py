"""Run configuration file format (YAML, strictly parsed).

Unknown keys are fatal so benchmark results stay unambiguous.  A reference
config documenting every default can be generated with `reference_config`.
"""

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .engine import EngineConfig, Mode, preset
from .errors import ConfigError
from .rirsim import RoomSpec, SceneSpec


@dataclass(frozen=True)
class EvalConfig:
    window_seconds: float = 2.0
    hop_seconds: float = 0.5
    proj_len: int = 512
    discard_seconds: float = 10.0


@dataclass(frozen=True)
class IoConfig:
    input_path: str = ""
    output_dir: str = "out"
    corpus_root: str = ""
    synthetic_sources: bool = True
    duration_seconds: float = 20.0


@dataclass(frozen=True)
class RunConfig:
    engine: EngineConfig = field(default_factory=EngineConfig)
    scene: SceneSpec = field(default_factory=SceneSpec)
    room: RoomSpec = field(default_factory=RoomSpec)
    eval: EvalConfig = field(default_factory=EvalConfig)
    io: IoConfig = field(default_factory=IoConfig)
    seed: int = 0
    preset_name: str = ""


def _build(cls, data: dict, context: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{context}: expected a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key == "mode" and cls is EngineConfig:
            value = Mode(value)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def load_config(path) -> RunConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    sections = {
        "engine": EngineConfig,
        "scene": SceneSpec,
        "room": RoomSpec,
        "eval": EvalConfig,
        "io": IoConfig,
    }
    unknown = set(raw) - set(sections) - {"seed", "preset"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    preset_name = raw.get("preset", "")
    engine_overrides = raw.get("engine", {})
    if preset_name:
        if not isinstance(engine_overrides, dict):
            raise ConfigError("engine: expected a mapping")
        base = preset(preset_name)
        merged = {**_engine_dict(base), **engine_overrides}
        engine_cfg = _build(EngineConfig, merged, "engine")
    else:
        engine_cfg = _build(EngineConfig, engine_overrides, "engine")
    return RunConfig(
        engine=engine_cfg,
        scene=_build(SceneSpec, raw.get("scene", {}), "scene"),
        room=_build(RoomSpec, raw.get("room", {}), "room"),
        eval=_build(EvalConfig, raw.get("eval", {}), "eval"),
        io=_build(IoConfig, raw.get("io", {}), "io"),
        seed=int(raw.get("seed", 0)),
        preset_name=preset_name,
    )


def _engine_dict(cfg: EngineConfig) -> dict:
    data = asdict(cfg)
    data["mode"] = cfg.mode.value
    return data


def dump_config(cfg: RunConfig) -> str:
    """Round-trippable YAML rendering of a RunConfig."""
    data = {
        "engine": _engine_dict(cfg.engine),
        "scene": asdict(cfg.scene),
        "room": asdict(cfg.room),
        "eval": asdict(cfg.eval),
        "io": asdict(cfg.io),
        "seed": cfg.seed,
    }
    if cfg.preset_name:
        data["preset"] = cfg.preset_name
    for section in ("scene", "room"):
        data[section] = {
            k: list(v) if isinstance(v, tuple) else v for k, v in data[section].items()
        }
    return yaml.safe_dump(data, sort_keys=True)


def reference_config() -> str:
    """YAML listing of every setting at its default value."""
    return dump_config(RunConfig())
