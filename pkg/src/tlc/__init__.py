"""Trajectory- and language-controlled motion synthesis toolkit."""

from .config import Config, OptimizeConfig, load_config, paper_profile, toy_profile
from .motion import (
    GROUPS,
    MotionClip,
    PartialTrajectory,
    PoseFeatureLayout,
    SkeletonSpec,
    default_skeleton,
    features_from_positions,
    merge_groups,
    recover_global_positions,
    split_by_groups,
)

__all__ = [
    "Config",
    "GROUPS",
    "MotionClip",
    "OptimizeConfig",
    "PartialTrajectory",
    "PoseFeatureLayout",
    "SkeletonSpec",
    "default_skeleton",
    "features_from_positions",
    "load_config",
    "merge_groups",
    "paper_profile",
    "recover_global_positions",
    "split_by_groups",
    "toy_profile",
]
