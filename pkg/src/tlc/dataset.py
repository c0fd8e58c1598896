"""Deterministic procedural motion corpus with templated text.

Each sample is drawn from a parametric family (walks, turns, reaches, squats,
waves, and a walk-then-raise composite) via an independent counter-based RNG
stream keyed by (seed, sample index), so generation is order-independent and
reproducible. Clips are padded to t_max by repeating the last frame with the
velocity channels zeroed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import CorpusConfig
from .errors import ConfigError, LayoutError
from .motion import (
    GROUPS,
    MotionClip,
    PartialTrajectory,
    PoseFeatureLayout,
    SkeletonSpec,
    clip_from_json,
    default_skeleton,
    features_from_positions,
    recover_global_positions,
)

REST_HEIGHT = 0.92


@dataclass
class CorpusSample:
    motion: MotionClip  # padded to t_max
    text: str
    full_trajectories: PartialTrajectory  # masks true up to true_length
    true_length: int


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray  # clamped >= 1e-6

    @classmethod
    def from_features(cls, features: np.ndarray) -> "NormStats":
        mean = features.reshape(-1, features.shape[-1]).mean(axis=0)
        std = features.reshape(-1, features.shape[-1]).std(axis=0)
        return cls(mean=mean, std=np.maximum(std, 1e-6))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps({"mean": self.mean.tolist(), "std": self.std.tolist()})
        )

    @classmethod
    def load(cls, path: str | Path) -> "NormStats":
        doc = json.loads(Path(path).read_text())
        return cls(np.asarray(doc["mean"], dtype=np.float64),
                   np.asarray(doc["std"], dtype=np.float64))


def normalize(clip: MotionClip, stats: NormStats) -> MotionClip:
    if clip.feature_dim != stats.mean.shape[0]:
        raise LayoutError("stats dimension does not match the clip")
    return MotionClip((clip.features - stats.mean) / stats.std, fps=clip.fps)


def denormalize(clip: MotionClip, stats: NormStats) -> MotionClip:
    if clip.feature_dim != stats.mean.shape[0]:
        raise LayoutError("stats dimension does not match the clip")
    return MotionClip(clip.features * stats.std + stats.mean, fps=clip.fps)


def sample_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent counter-based stream for (seed, *stream ids)."""
    ss = np.random.SeedSequence(entropy=seed & 0xFFFFFFFFFFFFFFFF, spawn_key=stream)
    return np.random.Generator(np.random.Philox(seed=ss))


def extract_key_trajectories(
    clip: MotionClip, skeleton: SkeletonSpec, layout: PoseFeatureLayout
) -> PartialTrajectory:
    positions = recover_global_positions(clip, layout)
    key = positions[:, skeleton.key_joint_indices(), :]
    return PartialTrajectory(key, np.ones((clip.length, len(GROUPS)), dtype=bool))


def pad_clip(clip: MotionClip, t_max: int, layout: PoseFeatureLayout) -> MotionClip:
    if clip.length > t_max:
        raise LayoutError(f"clip of {clip.length} frames exceeds t_max={t_max}")
    if clip.length == t_max:
        return clip.copy()
    pad = np.tile(clip.features[-1:], (t_max - clip.length, 1))
    pad[:, layout.root_yaw_velocity] = 0.0
    pad[:, layout.root_linear_velocity] = 0.0
    pad[:, layout.joint_velocities] = 0.0
    return MotionClip(np.concatenate([clip.features, pad], axis=0), fps=clip.fps)


def _smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def _assemble_frames(
    skeleton: SkeletonSpec,
    root_x: np.ndarray,
    root_z: np.ndarray,
    yaw: np.ndarray,
    pelvis_h: np.ndarray,
    gait_phase: np.ndarray,
    gait_amp: np.ndarray,
    left_lift: np.ndarray,
    right_lift: np.ndarray,
    left_reach: np.ndarray,
    right_reach: np.ndarray,
    wave_phase: np.ndarray,
) -> np.ndarray:
    """Character-local pose (facing +x, left at -z) rotated by yaw and placed on the root path."""
    T = root_x.shape[0]
    local = np.zeros((T, skeleton.num_joints, 3))
    idx = skeleton.joint_index
    h = pelvis_h + 0.012 * gait_amp * np.sin(2.0 * gait_phase)
    crouch = np.maximum(REST_HEIGHT - pelvis_h, 0.0)

    local[:, idx("pelvis")] = np.stack([np.zeros(T), h, np.zeros(T)], axis=1)
    for y_off, name in ((0.12, "spine1"), (0.26, "spine2"), (0.40, "spine3"),
                        (0.50, "neck"), (0.66, "head")):
        local[:, idx(name), 0] = 0.25 * crouch
        local[:, idx(name), 1] = h + y_off

    for side, sign in (("left", -1.0), ("right", 1.0)):
        phase = gait_phase + (0.0 if side == "left" else np.pi)
        hip = np.stack([np.zeros(T), h - 0.06, np.full(T, sign * 0.10)], axis=1)
        ankle = np.stack(
            [
                0.20 * gait_amp * np.sin(phase),
                0.08 + 0.05 * gait_amp * np.maximum(0.0, np.cos(phase)),
                np.full(T, sign * 0.10),
            ],
            axis=1,
        )
        knee = 0.5 * (hip + ankle)
        knee[:, 0] += 0.04 + 0.04 * gait_amp * np.abs(np.cos(phase)) + 0.5 * crouch
        foot = ankle + np.array([0.12, -0.04, 0.0])
        local[:, idx(f"{side}_hip")] = hip
        local[:, idx(f"{side}_knee")] = knee
        local[:, idx(f"{side}_ankle")] = ankle
        local[:, idx(f"{side}_foot")] = foot

        lift = left_lift if side == "left" else right_lift
        reach = left_reach if side == "left" else right_reach
        hang = np.clip(1.0 - lift - reach, 0.0, 1.0)
        swing = np.sin(phase + np.pi) * gait_amp
        collar = np.stack([0.25 * crouch, h + 0.45, np.full(T, sign * 0.07)], axis=1)
        shoulder = np.stack([0.25 * crouch, h + 0.45, np.full(T, sign * 0.18)], axis=1)
        elbow_off = (
            hang[:, None] * np.array([0.01, -0.26, sign * -0.02])
            + lift[:, None] * np.array([0.10, 0.12, sign * -0.12])
            + reach[:, None] * np.array([0.24, -0.08, sign * -0.06])
        )
        wrist_off = (
            hang[:, None] * np.array([0.01, -0.25, sign * -0.01])
            + lift[:, None] * np.array([0.06, 0.26, sign * -0.04])
            + reach[:, None] * np.array([0.26, 0.04, sign * -0.02])
        )
        elbow = shoulder + elbow_off
        elbow[:, 0] += 0.05 * swing
        wrist = elbow + wrist_off
        wrist[:, 0] += 0.04 * swing
        wrist[:, 2] += 0.10 * np.sin(wave_phase) * lift * sign * -1.0
        local[:, idx(f"{side}_collar")] = collar
        local[:, idx(f"{side}_shoulder")] = shoulder
        local[:, idx(f"{side}_elbow")] = elbow
        local[:, idx(f"{side}_wrist")] = wrist

    c, s = np.cos(yaw), np.sin(yaw)
    world = np.empty_like(local)
    world[..., 0] = c[:, None] * local[..., 0] - s[:, None] * local[..., 2] + root_x[:, None]
    world[..., 1] = local[..., 1]
    world[..., 2] = s[:, None] * local[..., 0] + c[:, None] * local[..., 2] + root_z[:, None]
    return world


def _integrate_path(speed: np.ndarray, yaw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Root path from per-frame speed along the heading (same recurrence as recovery)."""
    T = speed.shape[0]
    root_x = np.zeros(T)
    root_z = np.zeros(T)
    step_x = np.cos(yaw) * speed
    step_z = np.sin(yaw) * speed
    root_x[1:] = np.cumsum(step_x[:-1])
    root_z[1:] = np.cumsum(step_z[:-1])
    return root_x, root_z


def _zeros(T: int) -> np.ndarray:
    return np.zeros(T)


def _generate_family(
    family: str, T: int, fps: float, rng: np.random.Generator, skeleton: SkeletonSpec
) -> tuple[np.ndarray, str]:
    dt = 1.0 / fps
    t = np.arange(T)
    side = "left" if rng.random() < 0.5 else "right"
    hand = "left" if rng.random() < 0.5 else "right"
    turn_sign = -1.0 if side == "left" else 1.0
    # parameters come from small discrete grids so the corpus is a family of
    # prototypes a desk-scale codebook can cover
    gait_freq = float(rng.choice([1.6, 1.9]))
    phase = 2.0 * np.pi * gait_freq * t * dt
    flat = dict(
        pelvis_h=np.full(T, REST_HEIGHT),
        left_lift=_zeros(T), right_lift=_zeros(T),
        left_reach=_zeros(T), right_reach=_zeros(T),
        wave_phase=_zeros(T),
    )

    if family == "walk_straight":
        speed = float(rng.choice([0.85, 1.0, 1.15, 1.3]))
        pace = "slowly" if speed < 1.0 else ("at a steady pace" if speed < 1.2 else "quickly")
        yaw = _zeros(T)
        rx, rz = _integrate_path(np.full(T, speed * dt), yaw)
        pos = _assemble_frames(skeleton, rx, rz, yaw, gait_phase=phase,
                               gait_amp=np.full(T, 1.0), **flat)
        return pos, f"a person walks forward {pace}"

    if family == "walk_arc":
        speed = float(rng.choice([0.9, 1.1]))
        total = turn_sign * float(rng.choice([0.7, 1.0, 1.4]))
        yaw = total * t / max(T - 1, 1)
        rx, rz = _integrate_path(np.full(T, speed * dt), yaw)
        pos = _assemble_frames(skeleton, rx, rz, yaw, gait_phase=phase,
                               gait_amp=np.full(T, 1.0), **flat)
        return pos, f"a person walks forward curving to the {side}"

    if family in ("walk_circle", "circle_then_raise"):
        radius = float(rng.choice([0.8, 1.0, 1.2, 1.4]))
        speed = float(rng.choice([0.9, 1.1]))
        rate = turn_sign * speed * dt / radius
        if family == "walk_circle":
            gait_amp = np.ones(T)
            lift_amt = _zeros(T)
        else:
            taper = 1.0 - _smoothstep((t / max(T - 1, 1) - 0.55) / 0.12)
            gait_amp = taper
            lift_amt = _smoothstep((t / max(T - 1, 1) - 0.68) / 0.18)
        yaw = np.concatenate([[0.0], np.cumsum(rate * gait_amp[:-1])])
        rx, rz = _integrate_path(speed * dt * gait_amp, yaw)
        args = dict(flat)
        if family == "circle_then_raise":
            args[f"{hand}_lift"] = lift_amt
        pos = _assemble_frames(skeleton, rx, rz, yaw, gait_phase=phase,
                               gait_amp=gait_amp, **args)
        text = f"a person walks in a circle to the {side}"
        if family == "circle_then_raise":
            text += f" then raises the {hand} hand"
        return pos, text

    if family == "turn_in_place":
        rate = turn_sign * float(rng.choice([1.0, 1.6])) * dt
        yaw = rate * t
        pos = _assemble_frames(skeleton, _zeros(T), _zeros(T), yaw, gait_phase=phase,
                               gait_amp=np.full(T, 0.3), **flat)
        return pos, f"a person turns around in place to the {side}"

    if family == "reach":
        direction = "up" if rng.random() < 0.5 else "forward"
        ramp = _smoothstep((t / max(T - 1, 1) - 0.2) / 0.3)
        ramp = ramp * (1.0 - _smoothstep((t / max(T - 1, 1) - 0.8) / 0.15))
        args = dict(flat)
        args[f"{hand}_lift" if direction == "up" else f"{hand}_reach"] = ramp
        pos = _assemble_frames(skeleton, _zeros(T), _zeros(T), _zeros(T),
                               gait_phase=_zeros(T), gait_amp=_zeros(T), **args)
        return pos, f"a person reaches {direction} with the {hand} hand"

    if family == "squat":
        depth = float(rng.choice([0.18, 0.26]))
        reps = 1 if rng.random() < 0.7 else 2
        bump = np.sin(np.pi * np.clip(t / max(T - 1, 1), 0, 1) * reps) ** 2
        args = dict(flat)
        args["pelvis_h"] = REST_HEIGHT - depth * bump
        pos = _assemble_frames(skeleton, _zeros(T), _zeros(T), _zeros(T),
                               gait_phase=_zeros(T), gait_amp=_zeros(T), **args)
        text = "a person squats down and stands back up"
        return pos, text + (" twice" if reps == 2 else "")

    if family == "wave":
        freq = float(rng.choice([1.5, 2.0]))
        lift = _smoothstep((t / max(T - 1, 1)) / 0.3)
        args = dict(flat)
        args[f"{hand}_lift"] = lift
        args["wave_phase"] = 2.0 * np.pi * freq * t * dt
        pos = _assemble_frames(skeleton, _zeros(T), _zeros(T), _zeros(T),
                               gait_phase=_zeros(T), gait_amp=_zeros(T), **args)
        return pos, f"a person waves the {hand} hand"

    raise ConfigError(f"unknown motion family {family!r}")


def generate_sample(
    config: CorpusConfig,
    seed: int,
    index: int,
    skeleton: SkeletonSpec,
    layout: PoseFeatureLayout,
) -> CorpusSample:
    rng = sample_rng(seed, index)
    family = config.families[int(rng.integers(0, len(config.families)))]
    min_len = max(8, int(np.ceil(config.t_max * config.min_length_fraction)))
    true_length = int(rng.integers(min_len, config.t_max + 1))
    positions, text = _generate_family(family, true_length, config.fps, rng, skeleton)
    clip = pad_clip(
        features_from_positions(positions, config.fps, skeleton, layout),
        config.t_max, layout,
    )
    traj = extract_key_trajectories(clip, skeleton, layout)
    traj.mask[true_length:] = False
    return CorpusSample(motion=clip, text=text, full_trajectories=traj, true_length=true_length)


def generate_corpus(
    config: CorpusConfig,
    count: int | None = None,
    seed: int = 0,
    skeleton: SkeletonSpec | None = None,
    layout: PoseFeatureLayout | None = None,
) -> tuple[list[CorpusSample], NormStats]:
    config.validate()
    count = config.count if count is None else count
    if count < 1:
        raise ConfigError("count must be >= 1")
    skeleton = skeleton or default_skeleton()
    layout = layout or PoseFeatureLayout(num_joints=skeleton.num_joints)
    samples = [generate_sample(config, seed, i, skeleton, layout) for i in range(count)]
    train = split_corpus(samples, seed)["train"]
    stats = NormStats.from_features(np.stack([s.motion.features for s in train]))
    return samples, stats


def split_corpus(samples: list[CorpusSample], seed: int) -> dict[str, list[CorpusSample]]:
    """80/10/10 split by position after a seeded shuffle."""
    order = np.arange(len(samples))
    sample_rng(seed, 0xFFFF).shuffle(order)
    n = len(samples)
    n_train = max(1, int(0.8 * n))
    n_val = int(0.1 * n)
    idx = {
        "train": order[:n_train],
        "val": order[n_train:n_train + n_val],
        "test": order[n_train + n_val:],
    }
    return {k: [samples[i] for i in v] for k, v in idx.items()}


def save_corpus(path: str | Path, samples: list[CorpusSample]) -> None:
    with open(path, "w") as fh:
        for s in samples:
            doc = {
                "text": s.text,
                "true_length": s.true_length,
                "motion": {
                    "fps": s.motion.fps,
                    "num_joints": (s.motion.feature_dim - 5) // 6,
                    "frames": s.motion.length,
                    "feature_dim": s.motion.feature_dim,
                    "features": s.motion.features.tolist(),
                },
            }
            fh.write(json.dumps(doc) + "\n")


def load_corpus(
    path: str | Path, skeleton: SkeletonSpec, layout: PoseFeatureLayout
) -> list[CorpusSample]:
    samples = []
    with open(path) as fh:
        for line in fh:
            doc = json.loads(line)
            clip = clip_from_json(doc["motion"])
            traj = extract_key_trajectories(clip, skeleton, layout)
            traj.mask[doc["true_length"]:] = False
            samples.append(
                CorpusSample(clip, doc["text"], traj, int(doc["true_length"]))
            )
    return samples
