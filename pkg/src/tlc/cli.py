"""Command-line entry points: data generation, training, generation, evaluation,
serving, and the split-vs-unsplit ablation."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import Config, load_config
from .dataset import (
    NormStats,
    generate_corpus,
    load_corpus,
    save_corpus,
    split_corpus,
)
from .errors import InputError
from .harness import (
    ik_vs_latent_report,
    run_ablation,
    run_eval_suite,
    write_rows_csv,
    write_rows_json,
)
from .metrics import ControlErrorAccumulator
from .models import ModelBundle, load_bundle, save_bundle
from .motion import PoseFeatureLayout, clip_to_json, default_skeleton, recover_global_positions
from .mtt import train_mtt
from .refine import generate_motion
from .vqvae import reconstruction_mpjpe, train_vqvae

MODEL_DIR_ENV = "TLC_MODEL_DIR"


def _add_shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="TOML or JSON config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--profile", choices=("toy", "paper"), default=None)


def _load(args) -> Config:
    return load_config(args.config, profile=args.profile, seed=args.seed)


def _model_dir(args) -> Path:
    directory = args.model_dir or os.environ.get(MODEL_DIR_ENV)
    if not directory:
        raise InputError(f"no model directory: pass --model-dir or set {MODEL_DIR_ENV}")
    return Path(directory)


def _load_data(data_dir: Path, cfg: Config):
    skeleton = default_skeleton()
    layout = PoseFeatureLayout(num_joints=cfg.num_joints)
    samples = load_corpus(data_dir / "corpus.jsonl", skeleton, layout)
    stats = NormStats.load(data_dir / "stats.json")
    meta = json.loads((data_dir / "meta.json").read_text())
    parts = split_corpus(samples, meta["seed"])
    return samples, parts, stats, skeleton, layout


def cmd_gen_data(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    samples, stats = generate_corpus(cfg.corpus, count=args.count, seed=cfg.seed)
    save_corpus(out / "corpus.jsonl", samples)
    stats.save(out / "stats.json")
    (out / "meta.json").write_text(json.dumps({"seed": cfg.seed, "config": cfg.to_dict()}))
    print(f"wrote {len(samples)} samples to {out} in {time.time() - t0:.1f}s")
    return 0


def cmd_train_vqvae(args) -> int:
    cfg = _load(args)
    samples, parts, stats, skeleton, layout = _load_data(Path(args.data), cfg)
    codec, history = train_vqvae(
        parts["train"], stats, cfg.vqvae, cfg.seed, skeleton, layout,
        split=not args.unsplit, log_every=args.log_every,
    )
    mpjpe = reconstruction_mpjpe(codec, parts["train"], stats)
    print(f"train MPJPE {100 * mpjpe:.2f} cm over {len(parts['train'])} samples")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .container import save_module

    save_module(out / "codec", "codec",
                {**cfg.vqvae.__dict__, "split": codec.split, "num_joints": layout.num_joints},
                codec)
    stats.save(out / "stats.json")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1))
    (out / "vqvae_history.json").write_text(json.dumps(history))
    print(f"codec saved under {out}")
    return 0


def cmd_train_mtt(args) -> int:
    cfg = _load(args)
    samples, parts, stats, skeleton, layout = _load_data(Path(args.data), cfg)
    codec_dir = Path(args.codec) if args.codec else Path(args.out)
    from .config import VqvaeConfig
    from .container import load_container, load_into_module
    from .vqvae import MotionCodec

    _, codec_cfg, _ = load_container(codec_dir / "codec")
    split = codec_cfg.pop("split", True)
    codec_cfg.pop("num_joints", None)
    codec = MotionCodec(VqvaeConfig(**codec_cfg), skeleton, layout, split=split)
    load_into_module(codec_dir / "codec", codec)
    codec.eval()

    model, history = train_mtt(parts["train"], codec, stats, cfg.mtt, cfg.seed,
                               log_every=args.log_every)
    out = Path(args.out)
    bundle = ModelBundle(codec, model, stats, cfg, skeleton, layout)
    save_bundle(out, bundle)
    (out / "mtt_history.json").write_text(json.dumps(history))
    print(f"model bundle saved under {out}")
    return 0


def _read_trajectory(path: Path | None, length: int | None):
    from .service import TrajectorySpec, trajectory_from_spec

    if path is None:
        from .motion import PartialTrajectory

        if length is None:
            raise InputError("--length is required when no --traj file is given")
        return PartialTrajectory.empty(length)
    spec = TrajectorySpec(**json.loads(Path(path).read_text()))
    return trajectory_from_spec(spec)


def cmd_generate(args) -> int:
    bundle = load_bundle(_model_dir(args))
    traj = _read_trajectory(args.traj, args.length)
    opt = replace(bundle.config.optimize, tolerance=args.tol)
    samples = generate_motion(
        args.text, traj, bundle.codec, bundle.mtt, bundle.stats,
        seed=args.seed if args.seed is not None else 0,
        opt_config=opt, num_samples=args.samples, fps=bundle.fps,
    )
    key_idx = bundle.skeleton.key_joint_indices()
    motions, per_sample = [], []
    acc = ControlErrorAccumulator()
    for gen in samples:
        positions = recover_global_positions(gen.clip, bundle.layout)
        motions.append(clip_to_json(gen.clip, bundle.layout, positions))
        entry = {"seed_index": gen.seed_index}
        if gen.refine is not None:
            entry["trace"] = gen.refine.trace_json()
        if traj.num_specified() > 0:
            acc.add(positions[:, key_idx, :], traj)
        per_sample.append(entry)
    doc = {
        "motions": motions,
        "per_sample": per_sample,
        "control_errors": acc.report().to_json() if traj.num_specified() > 0 else None,
    }
    Path(args.out).write_text(json.dumps(doc))
    if doc["control_errors"]:
        print(f"avg_err {doc['control_errors']['avg_err_cm']:.2f} cm")
    print(f"wrote {len(motions)} motions to {args.out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load(args)
    bundle = load_bundle(_model_dir(args))
    samples, parts, stats, skeleton, layout = _load_data(Path(args.data), cfg)
    rows = run_eval_suite(
        cfg.eval, bundle.codec, bundle.mtt, bundle.stats, parts["test"],
        cfg.seed, cfg.optimize,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows_csv(out / "results.csv", rows)
    write_rows_json(out / "results.json", rows)
    for row in rows:
        print(
            f"{row.control_joints:>10} mask={row.mask_rate:.2f} tol={row.tolerance:g} "
            f"avg_err={row.avg_err_cm:.2f}cm full={row.avg_err_full_cm:.2f}cm "
            f"mmod={row.mmodality:.2f} t/batch={row.seconds_per_batch:.1f}s"
        )
    print(f"results under {out}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load(args)
    samples, parts, stats, skeleton, layout = _load_data(Path(args.data), cfg)
    part_codec = part_mtt = None
    if args.model_dir or os.environ.get(MODEL_DIR_ENV):
        bundle = load_bundle(_model_dir(args))
        part_codec, part_mtt = bundle.codec, bundle.mtt
    report = run_ablation(cfg, parts["train"], stats, parts["test"], cfg.seed,
                          part_codec=part_codec, part_mtt=part_mtt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = report.pop("rows")
    write_rows_csv(out / "ablation.csv", rows)
    write_rows_json(out / "ablation.json", rows)
    doc = {**report}
    if part_codec is not None:
        doc["ik_comparison"] = ik_vs_latent_report(
            part_codec, part_mtt, stats, parts["test"][:4], cfg.seed, cfg.optimize,
        )
    (out / "ablation_summary.json").write_text(json.dumps(doc, indent=1))
    print(json.dumps(doc, indent=1))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(_model_dir(args), ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tlc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the procedural corpus")
    _add_shared(p)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-vqvae", help="train the motion codec")
    _add_shared(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--unsplit", action="store_true")
    p.add_argument("--log-every", type=int, default=20)
    p.set_defaults(func=cmd_train_vqvae)

    p = sub.add_parser("train-mtt", help="train the trajectory transformer")
    _add_shared(p)
    p.add_argument("--data", required=True)
    p.add_argument("--codec", default=None, help="directory holding codec/ (defaults to --out)")
    p.add_argument("--out", required=True)
    p.add_argument("--log-every", type=int, default=10)
    p.set_defaults(func=cmd_train_mtt)

    p = sub.add_parser("generate", help="generate motions from text + trajectory")
    _add_shared(p)
    p.add_argument("--text", default="")
    p.add_argument("--traj", type=Path, default=None, help="TrajectorySpec JSON file")
    p.add_argument("--length", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--model-dir", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="run the evaluation suite")
    _add_shared(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model-dir", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="part-based vs unsplit codec ablation")
    _add_shared(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model-dir", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("serve", help="start the HTTP job service")
    _add_shared(p)
    p.add_argument("--model-dir", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
