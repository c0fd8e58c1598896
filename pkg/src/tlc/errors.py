"""Shared exception types."""


class LayoutError(ValueError):
    """Feature matrix does not conform to the declared pose feature layout."""


class PartitionError(ValueError):
    """Channel partition does not cover the feature layout exactly once."""


class InsufficientFramesError(ValueError):
    """Operation needs more frames than the input provides."""


class DegenerateMotionError(ValueError):
    """Motion cannot be converted to features (e.g. vertical hip line)."""


class ConfigError(ValueError):
    """Invalid configuration value."""


class InputError(ValueError):
    """Invalid user-facing input (requests, metric arguments)."""


class TrainingError(RuntimeError):
    """Training diverged. Carries the last finite-loss checkpoint when available."""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
