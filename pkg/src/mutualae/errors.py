"""Exception types shared across the package."""


class MutualAeError(Exception):
    """Base class for all package errors."""


class ShapeError(MutualAeError):
    """Array shape does not match what a layer or operation expects."""


class ConfigError(MutualAeError):
    """Invalid configuration; message carries the offending field path."""


class DataError(MutualAeError):
    """Malformed or insufficient input data."""


class TrainingError(MutualAeError):
    """Training aborted (e.g. non-finite gradients); carries epoch/batch context."""


class ProtocolError(MutualAeError):
    """Speak/listen protocol violated (e.g. stale translator dictionary)."""


class CheckpointError(MutualAeError):
    """Checkpoint file is corrupt or incompatible."""
