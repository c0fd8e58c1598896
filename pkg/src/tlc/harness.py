"""Batch evaluation, the split-vs-unsplit ablation, and the IK comparison."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import torch

from .config import Config, EvalConfig, OptimizeConfig
from .dataset import CorpusSample, NormStats, normalize, sample_rng
from .errors import InputError
from .metrics import (
    ControlErrorAccumulator,
    diversity,
    fid_proxy,
    multimodality,
    pooled_encoder_features,
)
from .motion import GROUPS, PartialTrajectory, recover_global_positions
from .mtt import Mtt, continuous_trajectory_mask, train_mtt
from .refine import generate_motion, joint_ik_baseline
from .vqvae import MotionCodec, train_vqvae

# wire-facing control names -> feature group names
CONTROL_GROUPS = {
    "root": ["root"],
    "head": ["head"],
    "left_hand": ["left_arm"],
    "right_hand": ["right_arm"],
    "left_foot": ["left_leg"],
    "right_foot": ["right_leg"],
    "both_hands": ["left_arm", "right_arm"],
    "both_feet": ["left_leg", "right_leg"],
    "upper_body": ["head", "left_arm", "right_arm"],
    "lower_body": ["root", "left_leg", "right_leg"],
    "all": list(GROUPS),
}


def selection_indices(name: str) -> list[int]:
    if name not in CONTROL_GROUPS:
        raise InputError(f"unknown control selection {name!r}")
    return [GROUPS.index(g) for g in CONTROL_GROUPS[name]]


@dataclass
class EvalRow:
    variant: str
    control_joints: str
    mask_rate: float
    tolerance: float
    num_samples: int
    samples_per_input: int
    traj_err_fraction: float
    loc_err_fraction: float
    avg_err_cm: float
    avg_err_full_cm: float
    unrefined_avg_err_cm: float
    diversity: float
    mmodality: float
    fid_proxy: float
    seconds_per_batch: float
    seconds_per_frame: float
    refine_iterations_mean: float

    def to_json(self) -> dict:
        return asdict(self)


def build_conditioning(
    sample: CorpusSample, selection: list[int], mask_rate: float,
    rng: np.random.Generator,
) -> PartialTrajectory:
    """Ground-truth tracks restricted to the selection, then segment-masked."""
    T = sample.true_length
    traj = PartialTrajectory(
        sample.full_trajectories.waypoints[:T].copy(),
        sample.full_trajectories.mask[:T].copy(),
    )
    hide = [g for g in range(len(GROUPS)) if g not in selection]
    traj.mask[:, hide] = False
    if mask_rate > 0:
        masked = continuous_trajectory_mask(traj, mask_rate, rng)
        # only the selected groups' masking matters; hidden groups stay hidden
        traj = masked
        traj.mask[:, hide] = False
    return traj


def evaluate_condition(
    codec: MotionCodec,
    model: Mtt,
    stats: NormStats,
    samples: list[CorpusSample],
    selection_name: str,
    mask_rate: float,
    opt: OptimizeConfig,
    seed: int,
    variant: str = "part",
    refine: bool = True,
    samples_per_input: int = 1,
) -> EvalRow:
    """One suite row. Control errors use each input's first generation; the
    distribution columns (diversity, MModality, FID) see all of them."""
    selection = selection_indices(selection_name)
    acc_spec = ControlErrorAccumulator()
    acc_full = ControlErrorAccumulator()
    acc_unref = ControlErrorAccumulator()
    gen_clips = []
    gen_feats = []
    mmod_groups = []
    iters = []
    total_frames = 0
    key_idx = codec.skeleton.key_joint_indices()
    t0 = time.perf_counter()
    for i, sample in enumerate(samples):
        cond_rng = sample_rng(seed, 8, selection[0], int(mask_rate * 1000), i)
        cond = build_conditioning(sample, selection, mask_rate, cond_rng)
        gens = generate_motion(
            sample.text, cond, codec, model, stats,
            seed=seed + 1000 * i, opt_config=opt, num_samples=samples_per_input,
            fps=sample.motion.fps, refine=refine,
        )
        gen = gens[0]
        pos = recover_global_positions(gen.clip, codec.layout)[:, key_idx, :]
        pos_unref = recover_global_positions(gen.unrefined_clip, codec.layout)[:, key_idx, :]
        T = cond.length
        if cond.num_specified() > 0:
            acc_spec.add(pos, cond)
            acc_unref.add(pos_unref, cond)
        full = PartialTrajectory(
            sample.full_trajectories.waypoints[:T].copy(),
            sample.full_trajectories.mask[:T].copy(),
        )
        full.mask[:, [g for g in range(len(GROUPS)) if g not in selection]] = False
        acc_full.add(pos, full)
        gen_clips.extend(g.clip for g in gens)
        feats = [normalize(g.clip, stats).features for g in gens]
        gen_feats.extend(feats)
        if samples_per_input >= 2:
            mmod_groups.append(feats)
        for g in gens:
            if g.refine is not None:
                iters.append(g.refine.iterations)
            total_frames += T
    elapsed = time.perf_counter() - t0

    real_clips = [s.motion for s in samples]
    fid = fid_proxy(
        pooled_encoder_features(real_clips, codec, stats),
        pooled_encoder_features(gen_clips, codec, stats),
    )
    div = (
        diversity(gen_feats, sample_rng(seed, 9)) if len(gen_feats) >= 2 else 0.0
    )
    mmod = multimodality(mmod_groups) if mmod_groups else float("nan")
    spec_rep = acc_spec.report() if acc_spec.n_keyframes else None
    unref_rep = acc_unref.report() if acc_unref.n_keyframes else None
    return EvalRow(
        variant=variant,
        control_joints=selection_name,
        mask_rate=mask_rate,
        tolerance=opt.tolerance,
        num_samples=len(samples),
        samples_per_input=samples_per_input,
        traj_err_fraction=spec_rep.traj_err_fraction if spec_rep else float("nan"),
        loc_err_fraction=spec_rep.loc_err_fraction if spec_rep else float("nan"),
        avg_err_cm=spec_rep.avg_err_cm if spec_rep else float("nan"),
        avg_err_full_cm=acc_full.report().avg_err_cm,
        unrefined_avg_err_cm=unref_rep.avg_err_cm if unref_rep else float("nan"),
        diversity=div,
        mmodality=mmod,
        fid_proxy=fid,
        seconds_per_batch=elapsed,
        seconds_per_frame=elapsed / max(total_frames, 1),
        refine_iterations_mean=float(np.mean(iters)) if iters else 0.0,
    )


def run_eval_suite(
    eval_cfg: EvalConfig,
    codec: MotionCodec,
    model: Mtt,
    stats: NormStats,
    samples: list[CorpusSample],
    seed: int,
    base_opt: OptimizeConfig | None = None,
    variant: str = "part",
) -> list[EvalRow]:
    eval_cfg.validate()
    base_opt = base_opt or OptimizeConfig()
    subset = samples[: eval_cfg.num_eval_samples]
    if not subset:
        raise InputError("no evaluation samples")
    rows = []
    for name in eval_cfg.control_joints:
        for rate in eval_cfg.mask_rates:
            for tol in eval_cfg.tolerances:
                opt = replace(base_opt, tolerance=tol)
                rows.append(
                    evaluate_condition(
                        codec, model, stats, subset, name, rate, opt, seed,
                        variant=variant,
                        samples_per_input=eval_cfg.samples_per_input,
                    )
                )
    return rows


def mmodality_by_mask_rate(
    codec: MotionCodec,
    model: Mtt,
    stats: NormStats,
    samples: list[CorpusSample],
    mask_rates: tuple[float, ...],
    seed: int,
    samples_per_input: int = 10,
    opt: OptimizeConfig | None = None,
    control: str = "root",
) -> dict[float, float]:
    """Within-input generation spread when masking the control track at each rate.

    Measured on recovered global key-joint tracks: the pose features are
    root-relative, so path diversity (the thing root masking releases) is
    invisible in feature space but plain in global positions.
    """
    opt = opt or OptimizeConfig(tolerance=1e-4, max_iterations=150)
    selection = selection_indices(control)
    key_idx = codec.skeleton.key_joint_indices()
    out = {}
    for r_idx, rate in enumerate(mask_rates):
        groups = []
        for i, sample in enumerate(samples):
            cond_rng = sample_rng(seed, 10, r_idx, i)
            cond = build_conditioning(sample, selection, rate, cond_rng)
            gens = generate_motion(
                sample.text, cond, codec, model, stats,
                seed=seed + 77 * i, opt_config=opt,
                num_samples=samples_per_input, fps=sample.motion.fps,
                refine=cond.num_specified() > 0,
            )
            tracks = [
                recover_global_positions(g.clip, codec.layout)[:, key_idx, :]
                for g in gens
            ]
            groups.append([t.reshape(t.shape[0], -1) for t in tracks])
        out[rate] = multimodality(groups)
    return out


def ik_vs_latent_report(
    codec: MotionCodec,
    model: Mtt,
    stats: NormStats,
    samples: list[CorpusSample],
    seed: int,
    opt: OptimizeConfig | None = None,
    mask_rate: float = 0.5,
    control: str = "root",
) -> dict:
    """Drift at unspecified frames: latent refinement vs per-frame IK.

    Conditions on a single control track so masked frames carry no waypoint at
    all; those frames are where the two adjustment modes differ structurally.
    """
    opt = opt or OptimizeConfig()
    key_idx = codec.skeleton.key_joint_indices()
    selection = selection_indices(control)
    latent_drifts, ik_drifts = [], []
    ik_bit_identical = True
    latent_moves_unspecified = False
    for i, sample in enumerate(samples):
        cond_rng = sample_rng(seed, 11, i)
        cond = build_conditioning(sample, selection, mask_rate, cond_rng)
        gen = generate_motion(
            sample.text, cond, codec, model, stats,
            seed=seed + 31 * i, opt_config=opt, num_samples=1,
            fps=sample.motion.fps,
        )[0]
        unrefined = gen.unrefined_clip
        refined = gen.clip
        ik = joint_ik_baseline(unrefined, cond, codec)
        unspec_frames = ~cond.mask.any(axis=1)
        if unspec_frames.any():
            if (ik.features[unspec_frames] != unrefined.features[unspec_frames]).any():
                ik_bit_identical = False
            if (refined.features[unspec_frames] != unrefined.features[unspec_frames]).any():
                latent_moves_unspecified = True
        complement = sample.full_trajectories.mask[: cond.length] & ~cond.mask
        complement[:, [g for g in range(len(GROUPS)) if g not in selection]] = False
        if complement.any():
            pos_u = recover_global_positions(unrefined, codec.layout)[:, key_idx, :]
            pos_r = recover_global_positions(refined, codec.layout)[:, key_idx, :]
            pos_ik = recover_global_positions(ik, codec.layout)[:, key_idx, :]
            d_lat = np.linalg.norm(pos_r - pos_u, axis=-1)[complement]
            d_ik = np.linalg.norm(pos_ik - pos_u, axis=-1)[complement]
            latent_drifts.append(d_lat.mean())
            ik_drifts.append(d_ik.mean())
    return {
        "mask_rate": mask_rate,
        "latent_complement_drift_cm": 100.0 * float(np.mean(latent_drifts)),
        "ik_complement_drift_cm": 100.0 * float(np.mean(ik_drifts)),
        "ik_unspecified_frames_bit_identical": ik_bit_identical,
        "latent_moves_unspecified_frames": latent_moves_unspecified,
    }


def group_independence_holds(codec: MotionCodec, t_frames: int = 16, seed: int = 0) -> bool:
    """True iff perturbing one group's channels changes only that per-group
    sub-slice of the 6*d-wide latent step (both variants expose equal width)."""
    gen = torch.Generator().manual_seed(seed)
    x = torch.randn(1, t_frames, codec.layout.feature_dim, generator=gen,
                    dtype=torch.float64)
    d = codec.latent_width // len(GROUPS)

    def sliced(feats):
        with torch.no_grad():
            z = codec.encode(feats)
        return z.reshape(z.shape[0], z.shape[1], len(GROUPS), d)

    base = sliced(x)
    for k, group in enumerate(GROUPS):
        cols = codec.partition.channels[group]
        perturbed = x.clone()
        perturbed[:, :, cols] += torch.randn(
            1, t_frames, len(cols), generator=gen, dtype=torch.float64
        )
        delta = (sliced(perturbed) - base).abs()
        others = [g for g in range(len(GROUPS)) if g != k]
        if delta[:, :, others, :].max().item() != 0.0:
            return False
        if delta[:, :, k, :].max().item() == 0.0:
            return False
    return True


def run_ablation(
    config: Config,
    samples: list[CorpusSample],
    stats: NormStats,
    eval_samples: list[CorpusSample],
    seed: int,
    part_codec: MotionCodec | None = None,
    part_mtt: Mtt | None = None,
) -> dict:
    """Part-based vs unsplit codec at equal per-step latent width, one config."""
    if part_codec is None:
        part_codec, _ = train_vqvae(
            samples, stats, config.vqvae, seed, part_codec_skeleton(config),
            part_codec_layout(config), split=True,
        )
    if part_mtt is None:
        part_mtt, _ = train_mtt(samples, part_codec, stats, config.mtt, seed)
    unsplit_codec, _ = train_vqvae(
        samples, stats, config.vqvae, seed,
        part_codec.skeleton, part_codec.layout, split=False,
    )
    unsplit_mtt, _ = train_mtt(samples, unsplit_codec, stats, config.mtt, seed)
    assert part_codec.latent_width == unsplit_codec.latent_width

    eval_cfg = replace(
        config.eval, control_joints=("all",), mask_rates=(0.0,),
        tolerances=(config.optimize.tolerance,),
    )
    rows = run_eval_suite(
        eval_cfg, part_codec, part_mtt, stats, eval_samples, seed, config.optimize,
        variant="part",
    )
    rows += run_eval_suite(
        eval_cfg, unsplit_codec, unsplit_mtt, stats, eval_samples, seed,
        config.optimize, variant="unsplit",
    )
    return {
        "latent_width": part_codec.latent_width,
        "part_group_independent": group_independence_holds(part_codec),
        "unsplit_group_independent": group_independence_holds(unsplit_codec),
        "rows": rows,
    }


def part_codec_skeleton(config: Config):
    from .motion import default_skeleton

    return default_skeleton()


def part_codec_layout(config: Config):
    from .motion import PoseFeatureLayout

    return PoseFeatureLayout(num_joints=config.num_joints)


def write_rows_csv(path: str | Path, rows: list[EvalRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(asdict(rows[0]).keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))


def write_rows_json(path: str | Path, rows: list[EvalRow]) -> None:
    Path(path).write_text(json.dumps([r.to_json() for r in rows], indent=1))
