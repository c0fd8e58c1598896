"""Dataclass configs for every module, profiles, and config-file loading.

A single TOML or JSON document mirrors this tree; the ``toy`` and ``paper``
profiles fill defaults and a config file overrides individual fields.
"""

from __future__ import annotations

import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

from .errors import ConfigError


@dataclass
class CorpusConfig:
    count: int = 200
    t_max: int = 196
    fps: float = 20.0
    min_length_fraction: float = 0.75
    families: tuple[str, ...] = (
        "walk_straight",
        "walk_arc",
        "walk_circle",
        "turn_in_place",
        "reach",
        "squat",
        "wave",
        "circle_then_raise",
    )

    def validate(self) -> None:
        if self.count < 1:
            raise ConfigError("corpus count must be >= 1")
        if self.t_max < 8:
            raise ConfigError("t_max must be >= 8")
        if not self.families:
            raise ConfigError("at least one motion family required")


@dataclass
class VqvaeConfig:
    codebook_size: int = 126
    code_dim: int = 126
    downsample: int = 4  # two stride-2 stages
    width: int = 128
    beta: float = 1.0
    root_channel_weight: float = 8.0
    ema_decay: float = 0.99
    reset_threshold: float = 1.0
    reset_warmup_steps: int = 40
    epochs: int = 300
    batch_size: int = 64
    lr: float = 2e-4
    lr_final: float = 1e-5

    def validate(self) -> None:
        if self.beta <= 0:
            raise ConfigError("beta must be > 0")
        if not (0.0 < self.ema_decay < 1.0):
            raise ConfigError("ema_decay must be in (0, 1)")
        if self.codebook_size < 1:
            raise ConfigError("codebook must hold at least one code")


@dataclass
class MttConfig:
    stage1_width: int = 512
    stage1_layers: int = 4
    stage2_width: int = 256
    stage2_layers: int = 3
    heads: int = 8
    waypoints_per_token: int = 4  # must equal the codec downsample factor
    text_buckets: int = 4096
    text_dim: int = 512
    temperature_start: float = 1.0
    temperature_end: float = 0.5
    mask_ramp_end: float = 0.75
    epochs: int = 200
    batch_size: int = 64
    lr: float = 2e-4
    lr_final: float = 1e-5

    def validate(self, downsample: int | None = None) -> None:
        if downsample is not None and self.waypoints_per_token != downsample:
            raise ConfigError("waypoints_per_token must equal the codec downsample factor")
        for w, h in ((self.stage1_width, self.heads), (self.stage2_width, self.heads)):
            if w % h:
                raise ConfigError("transformer widths must be divisible by the head count")


@dataclass
class OptimizeConfig:
    step_size: float = 0.1
    tolerance: float = 1e-6
    max_iterations: int = 1000
    history_size: int = 200
    line_search: str = "strong_wolfe"

    def validate(self) -> None:
        if self.tolerance <= 0:
            raise ConfigError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")


@dataclass
class IkConfig:
    steps: int = 50
    step_size: float = 0.05


@dataclass
class EvalConfig:
    control_joints: tuple[str, ...] = ("all",)
    mask_rates: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75)
    tolerances: tuple[float, ...] = (1e-4, 1e-5, 1e-6)
    samples_per_input: int = 2
    num_eval_samples: int = 12
    mmodality_tolerance: float = 1e-4
    mmodality_max_iterations: int = 150

    def validate(self) -> None:
        if not self.mask_rates or not self.tolerances or not self.control_joints:
            raise ConfigError("evaluation grids must be non-empty")


@dataclass
class ServiceConfig:
    max_workers: int = 2
    trace_tail: int = 25


@dataclass
class Config:
    profile: str = "paper"
    seed: int = 0
    num_joints: int = 22
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    vqvae: VqvaeConfig = field(default_factory=VqvaeConfig)
    mtt: MttConfig = field(default_factory=MttConfig)
    optimize: OptimizeConfig = field(default_factory=OptimizeConfig)
    ik: IkConfig = field(default_factory=IkConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def validate(self) -> None:
        self.corpus.validate()
        self.vqvae.validate()
        self.mtt.validate(self.vqvae.downsample)
        self.optimize.validate()
        self.eval.validate()
        if self.corpus.t_max % self.vqvae.downsample:
            raise ConfigError("t_max must be divisible by the downsample factor")

    def to_dict(self) -> dict:
        return asdict(self)


def toy_profile() -> Config:
    """CI-scale profile: small codebooks, short clips, narrow networks."""
    cfg = Config(profile="toy")
    cfg.corpus = CorpusConfig(count=200, t_max=64)
    cfg.vqvae = VqvaeConfig(
        codebook_size=32, code_dim=32, width=96,
        epochs=260, batch_size=16, lr=4e-4, lr_final=4e-5,
    )
    cfg.mtt = MttConfig(
        stage1_width=128, stage2_width=64, heads=4,
        epochs=150, batch_size=16, lr=6e-4, lr_final=6e-5,
    )
    return cfg


def paper_profile() -> Config:
    return Config(profile="paper")


PROFILES = {"toy": toy_profile, "paper": paper_profile}


def _apply_overrides(obj, overrides: dict, path: str = "") -> None:
    names = {f.name: f for f in fields(obj)}
    for key, value in overrides.items():
        if key not in names:
            raise ConfigError(f"unknown config key {path}{key}")
        current = getattr(obj, key)
        if is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}{key} must be a table")
            _apply_overrides(current, value, path=f"{path}{key}.")
        else:
            if isinstance(current, tuple) and isinstance(value, list):
                value = tuple(value)
            setattr(obj, key, value)


def load_config(path: str | Path | None = None, profile: str | None = None,
                seed: int | None = None) -> Config:
    doc: dict = {}
    if path is not None:
        path = Path(path)
        if path.suffix == ".toml":
            doc = tomllib.loads(path.read_text())
        else:
            doc = json.loads(path.read_text())
    name = profile or doc.get("profile", "paper")
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}; expected one of {sorted(PROFILES)}")
    cfg = PROFILES[name]()
    doc.pop("profile", None)
    _apply_overrides(cfg, doc)
    if seed is not None:
        cfg.seed = seed
    cfg.validate()
    return cfg
