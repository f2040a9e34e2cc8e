"""Run and training configuration, loadable from TOML or JSON.

A config file holds optional ``[run]`` and ``[train]`` tables whose keys
match the dataclass fields below.
"""

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import tomli

from .errors import BadParameter, FormatError
from .render import RenderSettings


@dataclass(frozen=True)
class RunConfig:
    frames: int = 17
    width: int = 128
    height: int = 128
    spp_diffuse: int = 64
    spp_glossy: int = 128
    roughness_rough: float = 0.34
    roughness_glossy: float = 0.05
    rotation_total: float = 0.0       # yaw of the env over the clip, degrees
    force_procedural: bool = False
    env_resolution: int = 64          # procedural fallback sky height
    layout_restarts: int = 8
    previews: bool = True

    def __post_init__(self):
        if self.frames < 2:
            raise BadParameter("frames must be >= 2")
        self.render_settings(0)

    def render_settings(self, seed):
        return RenderSettings(self.width, self.height, self.spp_diffuse, self.spp_glossy,
                              self.roughness_rough, self.roughness_glossy, seed=seed)


@dataclass(frozen=True)
class TrainConfig:
    samples: int = 64
    size: int = 32
    steps_a: int = 250
    steps_b: int = 250
    steps_c: int = 0
    batch_size: int = 8
    lr: float = 1e-3
    render_spp: int = 8


def _build(cls, table, name):
    known = {f.name for f in fields(cls)}
    unknown = set(table) - known
    if unknown:
        raise BadParameter(f"[{name}]: unknown key(s) {sorted(unknown)}")
    return replace(cls(), **table)


def load_config(path=None):
    """(RunConfig, TrainConfig) from a ``.toml`` or ``.json`` file, or defaults."""
    if path is None:
        return RunConfig(), TrainConfig()
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            raw = json.loads(path.read_text())
        else:
            raw = tomli.loads(path.read_text())
    except (json.JSONDecodeError, tomli.TOMLDecodeError) as e:
        raise FormatError(f"{path}: {e}") from None
    extra = set(raw) - {"run", "train"}
    if extra:
        raise BadParameter(f"{path}: unknown section(s) {sorted(extra)}")
    return _build(RunConfig, raw.get("run", {}), "run"), _build(TrainConfig, raw.get("train", {}), "train")


def as_dict(cfg):
    return asdict(cfg)
