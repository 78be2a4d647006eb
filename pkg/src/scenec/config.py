"""Pipeline configuration: documented JSON key-value file, validated ranges,
and a canonical hash that is stable across key reordering."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .background import BackgroundConfig, GridConfig
from .errors import ConfigError
from .layout import LayoutConfig


@dataclass(frozen=True)
class PipelineConfig:
    dataset_root: str
    catalog_path: str
    output_dir: str
    seed: int                       # explicit; never defaulted from the clock
    scenes: tuple = ()
    osm_path: str = ""              # local OSM XML extract
    osm_fetch: bool = False         # offline by default
    osm_cache_dir: str = ""
    osm_radius_m: float = 500.0
    compat_path: str = ""
    cameras_per_scene: int = 20
    resolution: tuple = (1600, 900)
    top_k: int = 1
    tiles: int = 1
    min_box_pixels: int = 25
    sidewalk_width: float = 2.0
    ground_margin: float = 30.0
    curation_min_classes: int = 6
    curation_pixel_floor: float = 0.001
    color_alpha: float = 0.8
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    background: BackgroundConfig = field(default_factory=BackgroundConfig)

    def __post_init__(self):
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an explicit integer")
        _check(self.cameras_per_scene >= 1, "cameras_per_scene must be >= 1")
        _check(len(self.resolution) == 2 and all(int(v) > 0 for v in self.resolution),
               "resolution must be two positive integers")
        _check(self.top_k >= 1, "top_k must be >= 1")
        _check(self.tiles >= 1, "tiles must be >= 1")
        _check(self.min_box_pixels >= 1, "min_box_pixels must be >= 1")
        _check(self.sidewalk_width > 0, "sidewalk_width must be positive")
        _check(self.curation_min_classes >= 1, "curation_min_classes must be >= 1")
        _check(0.0 <= self.curation_pixel_floor < 1.0, "curation_pixel_floor must be in [0, 1)")
        _check(0.0 <= self.color_alpha <= 1.0, "color_alpha must be in [0, 1]")
        _check(self.layout.bins >= 8, "layout.bins must be >= 8")
        _check(0.0 < self.layout.dominance <= 1.0, "layout.dominance must be in (0, 1]")
        _check(0.0 < self.layout.rect_ratio <= 1.0, "layout.rect_ratio must be in (0, 1]")
        _check(self.grid.cell > 0, "grid.cell must be positive")
        _check(self.background.spacing > 0, "background.spacing must be positive")
        _check(self.background.min_scale <= self.background.max_scale,
               "background.min_scale must not exceed max_scale")
        _check(self.background.mask_margin >= self.grid.cell / 1.414,
               "background.mask_margin must cover half the cell diagonal")
        object.__setattr__(self, "scenes", tuple(self.scenes))
        object.__setattr__(self, "resolution",
                           (int(self.resolution[0]), int(self.resolution[1])))


def _check(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


_NESTED = {"layout": LayoutConfig, "grid": GridConfig, "background": BackgroundConfig}


def config_from_dict(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    kwargs = dict(doc)
    for name, cls in _NESTED.items():
        if name in kwargs:
            sub = kwargs[name]
            if not isinstance(sub, dict):
                raise ConfigError(f"config.{name} must be an object")
            sub_known = {f.name for f in fields(cls)}
            sub_unknown = set(sub) - sub_known
            if sub_unknown:
                raise ConfigError(f"unknown config.{name} key(s): {sorted(sub_unknown)}")
            sub = {k: (tuple(v) if isinstance(v, list) else v) for k, v in sub.items()}
            kwargs[name] = cls(**sub)
    if "resolution" in kwargs:
        kwargs["resolution"] = tuple(kwargs["resolution"])
    missing = [k for k in ("dataset_root", "catalog_path", "output_dir", "seed") if k not in kwargs]
    if missing:
        raise ConfigError(f"missing required config key(s): {missing}")
    try:
        return PipelineConfig(**kwargs)
    except TypeError as e:
        raise ConfigError(f"bad config: {e}") from e


def load_config(path) -> PipelineConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file missing: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    return config_from_dict(doc)


def config_hash(cfg: PipelineConfig) -> str:
    """sha256 of the canonically ordered config; reordering-equivalent configs agree."""
    doc = asdict(cfg)
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _json_default(value):
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"unserializable config value: {value!r}")
