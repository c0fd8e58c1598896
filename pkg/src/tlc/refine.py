"""Test-time latent refinement, the per-frame IK baseline, and generation.

Refinement minimizes the mean squared distance between the decoded motion's
key-joint positions and the specified waypoints over the continuous latent,
with limited-memory BFGS and strong-Wolfe line search, starting from the
transformer's sampled latent. The latent is never re-quantized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch

from .config import IkConfig, OptimizeConfig
from .dataset import NormStats, sample_rng
from .errors import ConfigError, InputError
from .motion import (
    GROUPS,
    MotionClip,
    PartialTrajectory,
    recover_positions_torch,
)
from .mtt import Mtt, predict_code_logits, sample_codes
from .vqvae import DTYPE, LatentSequence, MotionCodec


@dataclass
class RefineResult:
    latent: np.ndarray
    clip: MotionClip  # decoded, denormalized
    objective_trace: list[float]
    grad_norm_trace: list[float]
    iterations: int
    converged: bool

    def trace_json(self) -> dict:
        return {
            "objective": self.objective_trace,
            "grad_norm": self.grad_norm_trace,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _stats_tensors(stats: NormStats) -> tuple[torch.Tensor, torch.Tensor]:
    return (
        torch.from_numpy(stats.mean).to(DTYPE),
        torch.from_numpy(stats.std).to(DTYPE),
    )


def _decode_key_positions(
    latent: torch.Tensor, codec, mean: torch.Tensor, std: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Latent (L, K, d) -> (raw features (T, M), key-joint positions (T, 6, 3))."""
    feats = codec.decode(latent[None])[0] * std + mean
    positions = recover_positions_torch(feats, codec.layout)
    key = positions[:, codec.skeleton.key_joint_indices(), :]
    return feats, key


def _objective(
    latent: torch.Tensor,
    shape: tuple[int, ...],
    codec,
    mean: torch.Tensor,
    std: torch.Tensor,
    waypoints: torch.Tensor,
    mask: torch.Tensor,
    n_terms: int,
) -> torch.Tensor:
    _, key = _decode_key_positions(latent.reshape(shape), codec, mean, std)
    diff = (key - waypoints) * mask[..., None]
    return (diff**2).sum() / n_terms


def objective_and_gradient(
    latent: np.ndarray | LatentSequence,
    traj: PartialTrajectory,
    codec,
    stats: NormStats,
) -> tuple[float, np.ndarray]:
    """Mean squared waypoint distance (m^2) over specified entries, and its gradient."""
    data = latent.data if isinstance(latent, LatentSequence) else latent
    if traj.num_specified() == 0:
        return 0.0, np.zeros_like(data)
    mean, std = _stats_tensors(stats)
    x = torch.tensor(np.asarray(data).reshape(-1), dtype=DTYPE, requires_grad=True)
    n_terms = int(traj.mask.sum()) * 3
    f = _objective(
        x, np.asarray(data).shape, codec, mean, std,
        torch.from_numpy(traj.waypoints).to(DTYPE),
        torch.from_numpy(traj.mask.astype(np.float64)),
        n_terms,
    )
    f.backward()
    return float(f.item()), x.grad.numpy().reshape(np.asarray(data).shape)


def refine_latent(
    q0: np.ndarray | LatentSequence,
    traj: PartialTrajectory,
    codec,
    stats: NormStats,
    config: OptimizeConfig,
    fps: float = 20.0,
    progress: Callable[[int, float, float], None] | None = None,
    should_cancel: Callable[[], bool] | None = None,
) -> RefineResult:
    """L-BFGS refinement from the sampled latent; returns the best-seen latent."""
    config.validate()
    if config.line_search != "strong_wolfe":
        raise ConfigError(f"unsupported line search {config.line_search!r}")
    data = q0.data if isinstance(q0, LatentSequence) else q0
    mean, std = _stats_tensors(stats)

    def decoded(latent_np: np.ndarray) -> MotionClip:
        with torch.no_grad():
            feats, _ = _decode_key_positions(
                torch.from_numpy(latent_np).to(DTYPE), codec, mean, std
            )
        return MotionClip(feats.numpy(), fps=fps)

    if traj.num_specified() == 0:
        return RefineResult(
            latent=np.array(data, copy=True),
            clip=decoded(np.asarray(data)),
            objective_trace=[0.0],
            grad_norm_trace=[0.0],
            iterations=0,
            converged=True,
        )

    waypoints = torch.from_numpy(traj.waypoints).to(DTYPE)
    mask = torch.from_numpy(traj.mask.astype(np.float64))
    n_terms = int(traj.mask.sum()) * 3
    shape = np.asarray(data).shape
    latent = torch.tensor(np.asarray(data).reshape(-1), dtype=DTYPE, requires_grad=True)
    opt = torch.optim.LBFGS(
        [latent],
        lr=config.step_size,
        max_iter=1,
        max_eval=10_000,
        tolerance_grad=0.0,
        tolerance_change=0.0,
        history_size=config.history_size,
        line_search_fn="strong_wolfe",
    )

    def closure():
        opt.zero_grad()
        f = _objective(latent, shape, codec, mean, std, waypoints, mask, n_terms)
        f.backward()
        return f

    def eval_now() -> tuple[float, float]:
        f = closure()
        g = latent.grad.abs().max().item()
        return float(f.item()), g

    f_prev, g_prev = eval_now()
    trace = [f_prev]
    grad_trace = [g_prev]
    best = latent.detach().clone()
    best_f = f_prev
    converged = g_prev < config.tolerance
    iterations = 0
    while not converged and iterations < config.max_iterations:
        if should_cancel is not None and should_cancel():
            break
        opt.step(closure)
        f_new, g_new = eval_now()
        iterations += 1
        if not np.isfinite(f_new) or f_new > f_prev:
            # line-search failure: keep the best-seen latent
            latent.data.copy_(best)
            converged = False
            break
        trace.append(f_new)
        grad_trace.append(g_new)
        if f_new < best_f:
            best_f = f_new
            best = latent.detach().clone()
        if progress is not None:
            progress(iterations, f_new, g_new)
        rel_decrease = (f_prev - f_new) / max(f_prev, 1e-300)
        if rel_decrease < config.tolerance or g_new < config.tolerance:
            converged = True
        f_prev, g_prev = f_new, g_new

    final = best.numpy().reshape(shape).copy()
    return RefineResult(
        latent=final,
        clip=decoded(final),
        objective_trace=trace,
        grad_norm_trace=grad_trace,
        iterations=iterations,
        converged=converged,
    )


def joint_ik_baseline(
    clip: MotionClip,
    traj: PartialTrajectory,
    codec,
    config: IkConfig = IkConfig(),
) -> MotionClip:
    """Per-frame gradient-descent pose adjustment toward that frame's waypoints.

    Frames without waypoints pass through bit-identical; the root path prefix
    entering each frame is held fixed, so only channels that move the frame
    itself (height, local positions) ever change.
    """
    layout = codec.layout
    skeleton = codec.skeleton
    key_idx = skeleton.key_joint_indices()
    out = clip.features.copy()
    with torch.no_grad():
        positions = recover_positions_torch(torch.from_numpy(clip.features).to(DTYPE), layout)
    feats = torch.from_numpy(clip.features).to(DTYPE)
    omega = feats[:, layout.root_yaw_velocity]
    yaw = torch.zeros_like(omega)
    yaw[1:] = torch.cumsum(omega[:-1], dim=0)
    root_x = positions[:, 0, 0]
    root_z = positions[:, 0, 2]
    J = layout.num_joints

    for t in range(clip.length):
        groups = np.flatnonzero(traj.mask[t])
        if groups.size == 0:
            continue
        targets = torch.from_numpy(traj.waypoints[t, groups]).to(DTYPE)
        c = torch.cos(yaw[t]).item()
        s = torch.sin(yaw[t]).item()
        rx, rz = root_x[t].item(), root_z[t].item()
        x = torch.tensor(out[t], dtype=DTYPE, requires_grad=True)
        for _ in range(config.steps):
            h = x[layout.root_height]
            local = x[layout.local_positions].reshape(J - 1, 3)
            gx = c * local[:, 0] - s * local[:, 2] + rx
            gz = s * local[:, 0] + c * local[:, 2] + rz
            body = torch.stack([gx, local[:, 1], gz], dim=-1)
            root = torch.stack([torch.tensor(rx, dtype=DTYPE), h, torch.tensor(rz, dtype=DTYPE)])
            all_pos = torch.cat([root[None], body], dim=0)
            key = all_pos[key_idx]
            f = ((key[groups] - targets) ** 2).sum()
            if x.grad is not None:
                x.grad = None
            f.backward()
            with torch.no_grad():
                x -= config.step_size * x.grad
        out[t] = x.detach().numpy()
    return MotionClip(out, fps=clip.fps)


@dataclass
class GeneratedSample:
    clip: MotionClip
    unrefined_clip: MotionClip
    refine: RefineResult | None
    seed_index: int


def _binarize_contacts(clip: MotionClip, layout) -> MotionClip:
    feats = clip.features.copy()
    feats[:, layout.foot_contacts] = (feats[:, layout.foot_contacts] > 0.5).astype(np.float64)
    return MotionClip(feats, fps=clip.fps)


def generate_motion(
    text: str,
    traj: PartialTrajectory,
    codec: MotionCodec,
    model: Mtt,
    stats: NormStats,
    seed: int,
    opt_config: OptimizeConfig,
    num_samples: int = 1,
    fps: float = 20.0,
    refine: bool = True,
    progress: Callable[[int, int, float], None] | None = None,
    should_cancel: Callable[[], bool] | None = None,
) -> list[GeneratedSample]:
    """Text + partial trajectory -> sampled, optionally refined motions."""
    if not text and traj.num_specified() == 0:
        raise InputError("at least one of text or trajectory must be non-empty")
    s = codec.downsample
    T = traj.length
    pad = (-T) % s
    work = traj
    if pad:
        work = PartialTrajectory(
            np.concatenate([traj.waypoints, np.zeros((pad, len(GROUPS), 3))]),
            np.concatenate([traj.mask, np.zeros((pad, len(GROUPS)), dtype=bool)]),
        )
    logits = torch.from_numpy(predict_code_logits(model, work, text)).to(DTYPE)

    mean, std = _stats_tensors(stats)
    results: list[GeneratedSample] = []
    for i in range(num_samples):
        rng = sample_rng(seed, 7, i)
        with torch.no_grad():
            _, _, q0 = sample_codes(logits, model.config.temperature_end, rng, codec)
        q0_np = q0.numpy()
        with torch.no_grad():
            feats0, _ = _decode_key_positions(torch.from_numpy(q0_np).to(DTYPE), codec, mean, std)
        unrefined = MotionClip(feats0.numpy()[:T], fps=fps)
        refine_result = None
        clip = unrefined
        if refine and work.num_specified() > 0:
            refine_result = refine_latent(
                q0_np, work, codec, stats, opt_config, fps=fps,
                progress=(lambda it, f, g, _i=i: progress(_i, it, f)) if progress else None,
                should_cancel=should_cancel,
            )
            clip = MotionClip(refine_result.clip.features[:T], fps=fps)
        results.append(
            GeneratedSample(
                clip=_binarize_contacts(clip, codec.layout),
                unrefined_clip=_binarize_contacts(unrefined, codec.layout),
                refine=refine_result,
                seed_index=i,
            )
        )
        if should_cancel is not None and should_cancel():
            break
    return results
