"""Loading and saving the trained model set (codec + transformer + stats)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .config import Config, MttConfig, VqvaeConfig, load_config
from .container import (
    ContainerError,
    load_container,
    load_into_module,
    manifest_digest,
    save_module,
)
from .dataset import NormStats
from .motion import PoseFeatureLayout, SkeletonSpec, default_skeleton
from .mtt import Mtt
from .vqvae import MotionCodec


@dataclass
class ModelBundle:
    codec: MotionCodec
    mtt: Mtt
    stats: NormStats
    config: Config
    skeleton: SkeletonSpec
    layout: PoseFeatureLayout

    @property
    def fps(self) -> float:
        return self.config.corpus.fps

    @property
    def t_max(self) -> int:
        return self.config.corpus.t_max


def save_bundle(directory: str | Path, bundle: ModelBundle) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_module(
        directory / "codec",
        "codec",
        {**asdict(bundle.codec.config), "split": bundle.codec.split,
         "num_joints": bundle.layout.num_joints},
        bundle.codec,
    )
    save_module(
        directory / "mtt",
        "mtt",
        {**asdict(bundle.mtt.config), "num_codebooks": bundle.mtt.num_codebooks,
         "codebook_size": bundle.mtt.codebook_size, "max_steps": bundle.mtt.max_steps},
        bundle.mtt,
    )
    bundle.stats.save(directory / "stats.json")
    (directory / "config.json").write_text(json.dumps(bundle.config.to_dict(), indent=1))


def load_bundle(directory: str | Path) -> ModelBundle:
    directory = Path(directory)
    if not (directory / "config.json").exists():
        raise ContainerError(f"no model bundle under {directory}")
    doc = json.loads((directory / "config.json").read_text())
    profile = doc.pop("profile", "paper")
    seed = doc.pop("seed", 0)
    config = load_config(None, profile=profile, seed=seed)
    _apply_dict(config, doc)

    skeleton = default_skeleton()
    layout = PoseFeatureLayout(num_joints=config.num_joints)

    _, codec_cfg, _ = load_container(directory / "codec")
    split = codec_cfg.pop("split", True)
    codec_cfg.pop("num_joints", None)
    codec = MotionCodec(VqvaeConfig(**codec_cfg), skeleton, layout, split=split)
    load_into_module(directory / "codec", codec)
    codec.eval()

    _, mtt_cfg, _ = load_container(directory / "mtt")
    extras = {k: mtt_cfg.pop(k) for k in ("num_codebooks", "codebook_size", "max_steps")}
    mtt_cfg = {k: tuple(v) if isinstance(v, list) else v for k, v in mtt_cfg.items()}
    mtt = Mtt(MttConfig(**mtt_cfg), **extras)
    load_into_module(directory / "mtt", mtt)
    mtt.eval()

    stats = NormStats.load(directory / "stats.json")
    return ModelBundle(codec, mtt, stats, config, skeleton, layout)


def bundle_digests(directory: str | Path) -> dict:
    directory = Path(directory)
    return {
        "codec": manifest_digest(directory / "codec"),
        "mtt": manifest_digest(directory / "mtt"),
    }


def _apply_dict(obj, doc: dict) -> None:
    from dataclasses import fields, is_dataclass

    names = {f.name: f for f in fields(obj)}
    for key, value in doc.items():
        if key not in names:
            continue
        current = getattr(obj, key)
        if is_dataclass(current) and isinstance(value, dict):
            _apply_dict(current, value)
        elif isinstance(current, tuple) and isinstance(value, list):
            setattr(obj, key, tuple(value))
        else:
            setattr(obj, key, value)
