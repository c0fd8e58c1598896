#!/usr/bin/env python3
"""End-to-end toy-profile training: corpus -> codec -> transformer -> model dir.

Roughly 12 minutes on a 2-core CPU; the result powers the CLI generate/eval
commands, the job service, and the browser editor.
"""

import argparse
import time
from pathlib import Path

import torch

from tlc.config import load_config
from tlc.dataset import generate_corpus, save_corpus, split_corpus
from tlc.models import ModelBundle, save_bundle
from tlc.motion import PoseFeatureLayout, default_skeleton
from tlc.mtt import train_mtt
from tlc.vqvae import reconstruction_mpjpe, train_vqvae


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("runs/toy"))
    parser.add_argument("--profile", default="toy", choices=("toy", "paper"))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", type=Path, default=None)
    args = parser.parse_args()

    cfg = load_config(args.config, profile=args.profile, seed=args.seed)
    skeleton = default_skeleton()
    layout = PoseFeatureLayout(num_joints=cfg.num_joints)

    t0 = time.time()
    samples, stats = generate_corpus(cfg.corpus, seed=cfg.seed)
    parts = split_corpus(samples, cfg.seed)
    print(f"corpus: {len(samples)} samples ({time.time() - t0:.0f}s)")

    t0 = time.time()
    codec, _ = train_vqvae(parts["train"], stats, cfg.vqvae, cfg.seed,
                           skeleton, layout, log_every=40)
    mpjpe = reconstruction_mpjpe(codec, parts["train"][:60], stats)
    print(f"codec: {time.time() - t0:.0f}s, train MPJPE {100 * mpjpe:.2f} cm")

    t0 = time.time()
    mtt, _ = train_mtt(parts["train"], codec, stats, cfg.mtt, cfg.seed, log_every=25)
    print(f"transformer: {time.time() - t0:.0f}s")

    args.out.mkdir(parents=True, exist_ok=True)
    save_bundle(args.out, ModelBundle(codec, mtt, stats, cfg, skeleton, layout))
    save_corpus(args.out / "corpus.jsonl", samples)
    stats.save(args.out / "stats.json")
    import json

    (args.out / "meta.json").write_text(json.dumps({"seed": cfg.seed, "config": cfg.to_dict()}))
    print(f"model bundle saved under {args.out}")
    return 0


if __name__ == "__main__":
    torch.set_num_threads(max(torch.get_num_threads(), 2))
    raise SystemExit(main())
