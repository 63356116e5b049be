"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad dimensions, inconsistent joint limits, unknown keys."""


class DivergenceError(RuntimeError):
    """Raised when training produces non-finite values or runaway losses."""


class BufferWarmingUp(Exception):
    """The replay buffer does not yet hold a full sampling window.

    This is a signal rather than a fault; the trainer catches it and skips
    the gradient phase for the iteration.
    """


class CheckpointError(RuntimeError):
    """Checkpoint file is corrupt, truncated or written by another format version."""
