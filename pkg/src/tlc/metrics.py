"""Control-accuracy and distribution metrics.

Keyframe = a mask-true trajectory entry. Trajectory error counts failed
(sample, group) tracks at the threshold, location error counts failed
keyframes, average error is the mean keyframe deviation in centimeters.
Diversity and multimodality are flattened-feature Euclidean distances in
normalized feature space; the FID proxy fits Gaussians in the space of the
trained part-based encoder mean-pooled over time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import torch

from .dataset import NormStats, normalize
from .errors import InputError
from .motion import MotionClip, PartialTrajectory
from .vqvae import DTYPE, MotionCodec

DEFAULT_THRESHOLD_M = 0.5


@dataclass
class ControlErrorReport:
    traj_err_fraction: float
    loc_err_fraction: float
    avg_err_cm: float
    threshold_m: float = DEFAULT_THRESHOLD_M

    def to_json(self) -> dict:
        return {
            "traj_err_fraction": self.traj_err_fraction,
            "loc_err_fraction": self.loc_err_fraction,
            "avg_err_cm": self.avg_err_cm,
            "threshold_m": self.threshold_m,
        }


class ControlErrorAccumulator:
    """Aggregates keyframe deviations across samples with exact counts."""

    def __init__(self, threshold_m: float = DEFAULT_THRESHOLD_M):
        self.threshold_m = threshold_m
        self.n_tracks = 0
        self.n_failed_tracks = 0
        self.n_keyframes = 0
        self.n_failed_keyframes = 0
        self.sum_dev_m = 0.0

    def add(self, key_positions: np.ndarray, traj: PartialTrajectory) -> None:
        if key_positions.shape != traj.waypoints.shape:
            raise InputError(
                f"positions {key_positions.shape} misaligned with trajectory "
                f"{traj.waypoints.shape}"
            )
        dev = np.linalg.norm(key_positions - traj.waypoints, axis=-1)  # (T, 6)
        for g in range(traj.mask.shape[1]):
            sel = traj.mask[:, g]
            if not sel.any():
                continue
            track_dev = dev[sel, g]
            self.n_tracks += 1
            self.n_failed_tracks += int((track_dev > self.threshold_m).any())
            self.n_keyframes += int(sel.sum())
            self.n_failed_keyframes += int((track_dev > self.threshold_m).sum())
            self.sum_dev_m += float(track_dev.sum())

    def report(self) -> ControlErrorReport:
        if self.n_keyframes == 0:
            raise InputError("no keyframes: control metrics are undefined")
        return ControlErrorReport(
            traj_err_fraction=self.n_failed_tracks / self.n_tracks,
            loc_err_fraction=self.n_failed_keyframes / self.n_keyframes,
            avg_err_cm=100.0 * self.sum_dev_m / self.n_keyframes,
            threshold_m=self.threshold_m,
        )


def control_accuracy(
    key_positions: np.ndarray,
    traj: PartialTrajectory,
    threshold_m: float = DEFAULT_THRESHOLD_M,
) -> ControlErrorReport:
    acc = ControlErrorAccumulator(threshold_m)
    acc.add(key_positions, traj)
    return acc.report()


def _flatten_common(features: list[np.ndarray]) -> np.ndarray:
    if len(features) < 2:
        raise InputError("need at least two motions")
    t_common = min(f.shape[0] for f in features)
    return np.stack([f[:t_common].reshape(-1) for f in features])


def diversity(
    features: list[np.ndarray],
    rng: np.random.Generator,
    num_pairs: int | None = None,
) -> float:
    """Mean Euclidean distance over seeded random disjoint pairs."""
    flat = _flatten_common(features)
    order = rng.permutation(len(flat))
    max_pairs = len(flat) // 2
    num_pairs = max_pairs if num_pairs is None else min(num_pairs, max_pairs)
    if num_pairs < 1:
        raise InputError("need at least one pair")
    a = flat[order[:num_pairs]]
    b = flat[order[num_pairs: 2 * num_pairs]]
    return float(np.linalg.norm(a - b, axis=1).mean())


def multimodality(groups: list[list[np.ndarray]]) -> float:
    """Mean over inputs of mean pairwise distance within each input's generations."""
    if not groups:
        raise InputError("need at least one group")
    per_group = []
    for group in groups:
        if len(group) < 2:
            raise InputError("each group needs at least two generations")
        flat = _flatten_common(group)
        dists = [
            np.linalg.norm(flat[i] - flat[j])
            for i in range(len(flat))
            for j in range(i + 1, len(flat))
        ]
        per_group.append(np.mean(dists))
    return float(np.mean(per_group))


def pooled_encoder_features(
    clips: list[MotionClip], codec: MotionCodec, stats: NormStats
) -> np.ndarray:
    """Extractor space for the FID proxy: continuous encoder latents mean-pooled over time."""
    from .dataset import pad_clip

    out = []
    with torch.no_grad():
        for clip in clips:
            s = codec.downsample
            target = ((clip.length + s - 1) // s) * s
            padded = pad_clip(clip, target, codec.layout)
            feats = torch.from_numpy(normalize(padded, stats).features).to(DTYPE)
            z = codec.encode(feats[None])[0]  # (L, K, d)
            out.append(z.mean(dim=0).reshape(-1).numpy())
    return np.stack(out)


def fid_proxy(real: np.ndarray, generated: np.ndarray) -> float:
    """Frechet distance between Gaussian fits of two feature sets."""
    real = np.asarray(real, dtype=np.float64)
    generated = np.asarray(generated, dtype=np.float64)
    if real.ndim == 1:
        real = real[:, None]
    if generated.ndim == 1:
        generated = generated[:, None]
    if len(real) < 2 or len(generated) < 2:
        raise InputError("need at least two samples per side")
    mu1, mu2 = real.mean(axis=0), generated.mean(axis=0)
    sigma1 = np.cov(real, rowvar=False).reshape(real.shape[1], real.shape[1])
    sigma2 = np.cov(generated, rowvar=False).reshape(generated.shape[1], generated.shape[1])
    eye = np.eye(sigma1.shape[0])
    sigma1 = sigma1 + 1e-6 * eye
    sigma2 = sigma2 + 1e-6 * eye
    covmean = scipy.linalg.sqrtm(sigma1 @ sigma2)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    diff = mu1 - mu2
    return float(diff @ diff + np.trace(sigma1 + sigma2 - 2.0 * covmean))
