"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Operand shapes do not compose."""


class DivergenceError(RuntimeError):
    """A weight update produced non-finite values."""


class DataFormatError(ValueError):
    """A dataset file is missing, truncated or malformed."""


class BuildError(ValueError):
    """A network description cannot be instantiated."""


class CheckpointError(ValueError):
    """A checkpoint file is unreadable or incompatible."""
