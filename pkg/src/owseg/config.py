"""Pipeline configuration: a flat JSON key-value file, keys mirroring CLI flags."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .grouping import GroupingConfig
from .proposals import SegParams
from .ranking import RankConfig


@dataclass
class PipelineConfig:
    input: str = ""
    out_dir: str = ""
    mode: str = "bottomup"  # bottomup | inference
    gt: str | None = None
    algo: str = "selsearch"  # selsearch | fzs | grid
    k: float = 50.0
    sigma: float = 0.8
    min_size: int = 20
    cell: int = 64
    weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    features: str = "handcrafted"  # handcrafted | tensor:DIR
    delta: float = 0.1
    tau: float = 0.5
    keep_originals: bool = True
    max_part_area_frac: float = 0.35
    parts_file: str | None = None
    top_k: int = 100
    dedup_iou: float = 0.95
    ks: tuple[int, ...] = (100, 300)
    kinds: tuple[str, ...] = ("box", "mask")
    workers: int = 1
    seed: int = 0

    def seg_params(self) -> SegParams:
        return SegParams(scale_k=self.k, sigma=self.sigma, min_size=self.min_size)

    def grouping_config(self) -> GroupingConfig:
        return GroupingConfig(delta=self.delta, tau=self.tau, keep_originals=self.keep_originals)

    def rank_config(self) -> RankConfig:
        return RankConfig(top_k=self.top_k, dedup_iou=self.dedup_iou)

    def validate(self) -> None:
        if self.mode not in ("bottomup", "inference"):
            raise ConfigError(f"mode must be bottomup or inference, got {self.mode!r}")
        if self.algo not in ("selsearch", "fzs", "grid"):
            raise ConfigError(f"algo must be selsearch, fzs or grid, got {self.algo!r}")
        if self.mode == "bottomup":
            if not self.input or not Path(self.input).is_dir():
                raise ConfigError(f"input directory not found: {self.input!r}")
        else:
            if not self.parts_file or not Path(self.parts_file).is_file():
                raise ConfigError(f"parts_file not found: {self.parts_file!r}")
        if not self.out_dir:
            raise ConfigError("out_dir is required")
        if self.gt is not None and not Path(self.gt).is_file():
            raise ConfigError(f"gt file not found: {self.gt!r}")
        if self.features != "handcrafted" and not self.features.startswith("tensor:"):
            raise ConfigError(f"features must be 'handcrafted' or 'tensor:DIR', got {self.features!r}")
        if self.features.startswith("tensor:"):
            d = self.features.split(":", 1)[1]
            if not Path(d).is_dir():
                raise ConfigError(f"feature tensor directory not found: {d!r}")
        if any(kind not in ("box", "mask") for kind in self.kinds):
            raise ConfigError(f"kinds must be box/mask, got {self.kinds!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if not (0.0 < self.max_part_area_frac <= 1.0):
            raise ConfigError(
                f"max_part_area_frac must lie in (0, 1], got {self.max_part_area_frac}"
            )
        try:
            self.seg_params()
            self.grouping_config()
            self.rank_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


_FIELD_NAMES = {f.name for f in fields(PipelineConfig)}


def load_config(path: str | Path, overrides: dict | None = None) -> PipelineConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be an object, got {type(raw).__name__}")
    unknown = set(raw) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(raw)
    for key, val in (overrides or {}).items():
        if val is not None:
            if key not in _FIELD_NAMES:
                raise ConfigError(f"unknown config override: {key}")
            merged[key] = val
    for tup_key in ("weights", "ks", "kinds"):
        if tup_key in merged and isinstance(merged[tup_key], list):
            merged[tup_key] = tuple(merged[tup_key])
    cfg = PipelineConfig(**merged)
    cfg.validate()
    return cfg
