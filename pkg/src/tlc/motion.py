"""Skeleton, pose feature layout, six-group body partition, and position recovery.

Features are per-frame rows of width M:

    [0]              root yaw velocity (radians/frame)
    [1:3]            root linear velocity in the root-yaw-aligned frame (m/frame, xz)
    [3]              root height (m)
    [4 : 4+3(J-1)]   local positions of the non-root joints, root-yaw-aligned,
                     xz relative to the root, y measured from the ground
    [.. : ..+3J]     global-frame joint velocities for all J joints (m/frame)
    [-4:]            foot contacts (left ankle, left toe, right ankle, right toe)

Velocities are per-frame deltas, so recovery is fps-free. Up axis is +y, units
are meters. Joint 0 is always the root.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from .errors import DegenerateMotionError, InsufficientFramesError, LayoutError, PartitionError

GROUPS = ("head", "left_arm", "right_arm", "left_leg", "right_leg", "root")
ROOT_GROUP = "root"

FOOT_SPEED_CONTACT_THRESHOLD = 0.005  # m/frame


@dataclass(frozen=True)
class SkeletonSpec:
    joint_names: tuple[str, ...]
    parent: tuple[int, ...]
    group_of: dict[str, str]
    key_joint_of_group: dict[str, str]

    def __post_init__(self):
        names = self.joint_names
        if len(set(names)) != len(names):
            raise ValueError("duplicate joint names")
        if set(self.group_of) != set(names):
            raise ValueError("group_of must cover every joint exactly once")
        if set(self.group_of.values()) != set(GROUPS):
            raise ValueError(f"expected the six groups {GROUPS}")
        root_joints = [n for n in names if self.group_of[n] == ROOT_GROUP]
        if root_joints != [names[0]]:
            raise ValueError("the root group must contain exactly the root joint (index 0)")
        if self.parent[0] != -1 or any(not (0 <= p < len(names)) for p in self.parent[1:]):
            raise ValueError("parents must form a tree rooted at joint 0")
        for j, p in enumerate(self.parent[1:], start=1):
            if p >= j:
                raise ValueError("parent indices must precede their children")
        if set(self.key_joint_of_group) != set(GROUPS):
            raise ValueError("key_joint_of_group must name one joint per group")
        for g, j in self.key_joint_of_group.items():
            if self.group_of[j] != g:
                raise ValueError(f"key joint {j} is not in group {g}")

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    def joint_index(self, name: str) -> int:
        return self.joint_names.index(name)

    def joints_in_group(self, group: str) -> list[int]:
        return [i for i, n in enumerate(self.joint_names) if self.group_of[n] == group]

    def key_joint_index(self, group: str) -> int:
        return self.joint_index(self.key_joint_of_group[group])

    def key_joint_indices(self) -> list[int]:
        return [self.key_joint_index(g) for g in GROUPS]


def default_skeleton() -> SkeletonSpec:
    """22-joint humanoid. Canonical facing is +x; the left side is then -z."""
    names = (
        "pelvis",
        "left_hip", "right_hip", "spine1",
        "left_knee", "right_knee", "spine2",
        "left_ankle", "right_ankle", "spine3",
        "left_foot", "right_foot", "neck",
        "left_collar", "right_collar", "head",
        "left_shoulder", "right_shoulder",
        "left_elbow", "right_elbow",
        "left_wrist", "right_wrist",
    )
    parent = (-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19)
    group_of = {
        "pelvis": "root",
        "spine1": "head", "spine2": "head", "spine3": "head", "neck": "head", "head": "head",
        "left_collar": "left_arm", "left_shoulder": "left_arm",
        "left_elbow": "left_arm", "left_wrist": "left_arm",
        "right_collar": "right_arm", "right_shoulder": "right_arm",
        "right_elbow": "right_arm", "right_wrist": "right_arm",
        "left_hip": "left_leg", "left_knee": "left_leg",
        "left_ankle": "left_leg", "left_foot": "left_leg",
        "right_hip": "right_leg", "right_knee": "right_leg",
        "right_ankle": "right_leg", "right_foot": "right_leg",
    }
    key = {
        "head": "head",
        "left_arm": "left_wrist",
        "right_arm": "right_wrist",
        "left_leg": "left_ankle",
        "right_leg": "right_ankle",
        "root": "pelvis",
    }
    return SkeletonSpec(names, parent, group_of, key)


@dataclass(frozen=True)
class PoseFeatureLayout:
    num_joints: int = 22
    # contact channels reference (heel, toe) per side; indices into the skeleton
    contact_joints: tuple[str, ...] = ("left_ankle", "left_foot", "right_ankle", "right_foot")

    @property
    def feature_dim(self) -> int:
        J = self.num_joints
        return 4 + 3 * (J - 1) + 3 * J + 4

    @property
    def root_yaw_velocity(self) -> int:
        return 0

    @property
    def root_linear_velocity(self) -> slice:
        return slice(1, 3)

    @property
    def root_height(self) -> int:
        return 3

    @property
    def local_positions(self) -> slice:
        return slice(4, 4 + 3 * (self.num_joints - 1))

    @property
    def joint_velocities(self) -> slice:
        start = 4 + 3 * (self.num_joints - 1)
        return slice(start, start + 3 * self.num_joints)

    @property
    def foot_contacts(self) -> slice:
        return slice(self.feature_dim - 4, self.feature_dim)

    def local_position_channels(self, joint: int) -> slice:
        if joint == 0:
            raise LayoutError("the root joint has no local-position channels")
        base = 4 + 3 * (joint - 1)
        return slice(base, base + 3)

    def velocity_channels(self, joint: int) -> slice:
        base = self.joint_velocities.start + 3 * joint
        return slice(base, base + 3)

    def check(self, features: np.ndarray) -> None:
        if features.ndim != 2 or features.shape[1] != self.feature_dim:
            raise LayoutError(
                f"expected (T, {self.feature_dim}) features, got {features.shape}"
            )


@dataclass
class MotionClip:
    features: np.ndarray  # (T, M) float64
    fps: float = 20.0

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise LayoutError(f"features must be (T>=1, M), got {self.features.shape}")

    @property
    def length(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def validate(self, layout: PoseFeatureLayout, strict_contacts: bool = False) -> None:
        layout.check(self.features)
        if not np.isfinite(self.features).all():
            raise LayoutError("features contain non-finite values")
        if strict_contacts:
            contacts = self.features[:, layout.foot_contacts]
            if not np.isin(contacts, (0.0, 1.0)).all():
                raise LayoutError("foot-contact channels must be 0 or 1")

    def copy(self) -> "MotionClip":
        return MotionClip(self.features.copy(), self.fps)


@dataclass
class PartialTrajectory:
    """Per-group key-joint waypoints with a presence mask (True = user-specified)."""

    waypoints: np.ndarray  # (T, 6, 3) float64
    mask: np.ndarray  # (T, 6) bool

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.waypoints.ndim != 3 or self.waypoints.shape[1:] != (len(GROUPS), 3):
            raise LayoutError(f"waypoints must be (T, 6, 3), got {self.waypoints.shape}")
        if self.mask.shape != self.waypoints.shape[:2]:
            raise LayoutError("mask shape must be (T, 6)")

    @property
    def length(self) -> int:
        return self.waypoints.shape[0]

    @classmethod
    def empty(cls, length: int) -> "PartialTrajectory":
        return cls(np.zeros((length, len(GROUPS), 3)), np.zeros((length, len(GROUPS)), dtype=bool))

    def num_specified(self) -> int:
        return int(self.mask.sum())

    def copy(self) -> "PartialTrajectory":
        return PartialTrajectory(self.waypoints.copy(), self.mask.copy())


def recover_positions_torch(features: torch.Tensor, layout: PoseFeatureLayout) -> torch.Tensor:
    """Differentiable feature-to-global-position recovery; (T, M) -> (T, J, 3)."""
    T = features.shape[0]
    if features.ndim != 2 or features.shape[1] != layout.feature_dim:
        raise LayoutError(f"expected (T, {layout.feature_dim}), got {tuple(features.shape)}")
    J = layout.num_joints
    omega = features[:, layout.root_yaw_velocity]
    vel = features[:, layout.root_linear_velocity]
    height = features[:, layout.root_height]
    local = features[:, layout.local_positions].reshape(T, J - 1, 3)

    yaw = torch.zeros_like(omega)
    if T > 1:
        yaw = torch.cat([yaw[:1], torch.cumsum(omega[:-1], dim=0)])
    c, s = torch.cos(yaw), torch.sin(yaw)

    # Rot(yaw) applied to (x, z): (x c - z s, x s + z c)
    step_x = c * vel[:, 0] - s * vel[:, 1]
    step_z = s * vel[:, 0] + c * vel[:, 1]
    root_x = torch.zeros_like(step_x)
    root_z = torch.zeros_like(step_z)
    if T > 1:
        root_x = torch.cat([root_x[:1], torch.cumsum(step_x[:-1], dim=0)])
        root_z = torch.cat([root_z[:1], torch.cumsum(step_z[:-1], dim=0)])

    lx, ly, lz = local[..., 0], local[..., 1], local[..., 2]
    gx = c[:, None] * lx - s[:, None] * lz + root_x[:, None]
    gz = s[:, None] * lx + c[:, None] * lz + root_z[:, None]
    body = torch.stack([gx, ly, gz], dim=-1)
    root = torch.stack([root_x, height, root_z], dim=-1)
    return torch.cat([root[:, None, :], body], dim=1)


def recover_global_positions(clip: MotionClip, layout: PoseFeatureLayout) -> np.ndarray:
    """Global joint positions (T, J, 3) from a feature clip."""
    layout.check(clip.features)
    with torch.no_grad():
        pos = recover_positions_torch(torch.from_numpy(clip.features), layout)
    return pos.numpy()


def _wrap_angle(a: np.ndarray) -> np.ndarray:
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def features_from_positions(
    positions: np.ndarray,
    fps: float,
    skeleton: SkeletonSpec,
    layout: PoseFeatureLayout,
) -> MotionClip:
    """Inverse of recovery for canonicalizable motions.

    The motion is rebased so frame 0 has the root at the xz origin with yaw 0;
    recover_global_positions then reproduces the rebased positions exactly.
    Yaw is read from the hip line projected to the ground plane.
    """
    positions = np.asarray(positions, dtype=np.float64)
    T = positions.shape[0]
    if T < 2:
        raise InsufficientFramesError("need at least 2 frames to derive velocities")
    J = layout.num_joints
    if positions.shape != (T, J, 3):
        raise LayoutError(f"expected (T, {J}, 3) positions, got {positions.shape}")

    lhip = skeleton.joint_index("left_hip")
    rhip = skeleton.joint_index("right_hip")
    across = positions[:, lhip] - positions[:, rhip]
    across_xz = np.stack([across[:, 0], across[:, 2]], axis=1)
    norms = np.linalg.norm(across_xz, axis=1)
    if (norms < 1e-8).any():
        raise DegenerateMotionError("hip line is vertical; yaw is unrecoverable")
    # forward = across x up = (-a_z, a_x) in (x, z); canonical facing is +x,
    # so yaw is the angle of the forward direction from the +x axis
    fwd = np.stack([-across[:, 2], across[:, 0]], axis=1) / norms[:, None]
    yaw = np.arctan2(fwd[:, 1], fwd[:, 0])

    # rebase so frame 0 is canonical
    yaw0 = yaw[0]
    shift = positions[0, 0].copy()
    shift[1] = 0.0
    p = positions - shift
    c0, s0 = np.cos(-yaw0), np.sin(-yaw0)
    x, z = p[..., 0].copy(), p[..., 2].copy()
    p[..., 0] = c0 * x - s0 * z
    p[..., 2] = s0 * x + c0 * z
    yaw = _wrap_angle(yaw - yaw0)

    omega = np.zeros(T)
    omega[:-1] = _wrap_angle(np.diff(yaw))

    root_xz = p[:, 0][:, (0, 2)]
    c, s = np.cos(yaw), np.sin(yaw)
    vel_xz = np.zeros((T, 2))
    d = np.diff(root_xz, axis=0)
    vel_xz[:-1, 0] = c[:-1] * d[:, 0] + s[:-1] * d[:, 1]
    vel_xz[:-1, 1] = -s[:-1] * d[:, 0] + c[:-1] * d[:, 1]

    rel = p[:, 1:] - p[:, :1] * np.array([1.0, 0.0, 1.0])
    local = np.empty_like(rel)
    local[..., 0] = c[:, None] * rel[..., 0] + s[:, None] * rel[..., 2]
    local[..., 1] = rel[..., 1]
    local[..., 2] = -s[:, None] * rel[..., 0] + c[:, None] * rel[..., 2]

    joint_vel = np.zeros((T, J, 3))
    joint_vel[:-1] = np.diff(p, axis=0)

    speeds = np.linalg.norm(np.diff(p, axis=0), axis=2)
    speeds = np.concatenate([speeds, speeds[-1:]], axis=0)
    contact_idx = [skeleton.joint_index(n) for n in layout.contact_joints]
    contacts = (speeds[:, contact_idx] < FOOT_SPEED_CONTACT_THRESHOLD).astype(np.float64)

    feats = np.zeros((T, layout.feature_dim))
    feats[:, layout.root_yaw_velocity] = omega
    feats[:, layout.root_linear_velocity] = vel_xz
    feats[:, layout.root_height] = p[:, 0, 1]
    feats[:, layout.local_positions] = local.reshape(T, -1)
    feats[:, layout.joint_velocities] = joint_vel.reshape(T, -1)
    feats[:, layout.foot_contacts] = contacts
    return MotionClip(feats, fps=fps)


class GroupPartition:
    """Channel ownership table for the six-group split of the feature layout.

    Root group owns the 4 root channels, the root joint's velocity channels and
    the 4 contact channels; every other joint contributes its local-position and
    velocity channels to its own group.
    """

    def __init__(self, skeleton: SkeletonSpec, layout: PoseFeatureLayout):
        if skeleton.num_joints != layout.num_joints:
            raise PartitionError("skeleton and layout joint counts differ")
        owner = {}
        for ch in (layout.root_yaw_velocity, layout.root_height):
            owner[ch] = ROOT_GROUP
        for ch in range(*layout.root_linear_velocity.indices(layout.feature_dim)):
            owner[ch] = ROOT_GROUP
        for ch in range(*layout.foot_contacts.indices(layout.feature_dim)):
            owner[ch] = ROOT_GROUP
        for j, name in enumerate(skeleton.joint_names):
            group = skeleton.group_of[name] if j else ROOT_GROUP
            for ch in range(*layout.velocity_channels(j).indices(layout.feature_dim)):
                owner[ch] = group
            if j:
                for ch in range(*layout.local_position_channels(j).indices(layout.feature_dim)):
                    owner[ch] = group
        missing = set(range(layout.feature_dim)) - set(owner)
        if missing:
            raise PartitionError(f"unassigned channels: {sorted(missing)}")
        self.channels = {
            g: np.array(sorted(ch for ch, og in owner.items() if og == g), dtype=np.int64)
            for g in GROUPS
        }
        self.widths = tuple(len(self.channels[g]) for g in GROUPS)
        order = np.concatenate([self.channels[g] for g in GROUPS])
        self.inverse = np.argsort(order)

    def split(self, features: np.ndarray) -> list[np.ndarray]:
        return [features[:, self.channels[g]] for g in GROUPS]

    def merge(self, blocks: Sequence[np.ndarray]) -> np.ndarray:
        if len(blocks) != len(GROUPS):
            raise PartitionError(f"expected {len(GROUPS)} blocks")
        stacked = np.concatenate(list(blocks), axis=1)
        return stacked[:, self.inverse]


def split_by_groups(
    clip: MotionClip, skeleton: SkeletonSpec, layout: PoseFeatureLayout
) -> list[np.ndarray]:
    layout.check(clip.features)
    return GroupPartition(skeleton, layout).split(clip.features)


def merge_groups(
    blocks: Sequence[np.ndarray], skeleton: SkeletonSpec, layout: PoseFeatureLayout
) -> np.ndarray:
    return GroupPartition(skeleton, layout).merge(blocks)


def clip_to_json(
    clip: MotionClip,
    layout: PoseFeatureLayout,
    global_positions: np.ndarray | None = None,
    include_positions: bool = True,
) -> dict:
    if include_positions and global_positions is None:
        global_positions = recover_global_positions(clip, layout)
    out = {
        "fps": clip.fps,
        "num_joints": layout.num_joints,
        "frames": clip.length,
        "feature_dim": clip.feature_dim,
        "features": clip.features.tolist(),
    }
    if include_positions:
        out["global_positions"] = global_positions.tolist()
    return out


def clip_from_json(doc: dict) -> MotionClip:
    feats = np.asarray(doc["features"], dtype=np.float64)
    clip = MotionClip(feats, fps=float(doc["fps"]))
    if doc.get("frames") != clip.length or doc.get("feature_dim") != clip.feature_dim:
        raise LayoutError("motion JSON header disagrees with the feature matrix")
    return clip
