#!/usr/bin/env python3
"""Train and save a micro model bundle for demos and UI tests (seconds, not minutes)."""

import argparse
from pathlib import Path

from tlc.config import Config, CorpusConfig, MttConfig, VqvaeConfig
from tlc.dataset import generate_corpus, split_corpus
from tlc.models import ModelBundle, save_bundle
from tlc.motion import PoseFeatureLayout, default_skeleton
from tlc.mtt import train_mtt
from tlc.vqvae import train_vqvae


def demo_config() -> Config:
    cfg = Config(profile="toy", seed=3)
    cfg.corpus = CorpusConfig(count=12, t_max=16)
    cfg.vqvae = VqvaeConfig(
        codebook_size=8, code_dim=8, width=24, epochs=10, batch_size=4,
        lr=1e-3, lr_final=5e-4, reset_warmup_steps=6,
    )
    cfg.mtt = MttConfig(
        stage1_width=32, stage2_width=16, heads=2, epochs=8, batch_size=4,
        lr=1e-3, lr_final=5e-4,
    )
    return cfg


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", type=Path)
    args = parser.parse_args()
    if (args.out / "config.json").exists():
        print(f"model already present under {args.out}")
        return 0
    cfg = demo_config()
    samples, stats = generate_corpus(cfg.corpus, seed=cfg.seed)
    train = split_corpus(samples, cfg.seed)["train"]
    skeleton = default_skeleton()
    layout = PoseFeatureLayout(num_joints=cfg.num_joints)
    codec, _ = train_vqvae(train, stats, cfg.vqvae, cfg.seed, skeleton, layout)
    mtt, _ = train_mtt(train, codec, stats, cfg.mtt, cfg.seed)
    save_bundle(args.out, ModelBundle(codec, mtt, stats, cfg, skeleton, layout))
    print(f"demo model saved under {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
