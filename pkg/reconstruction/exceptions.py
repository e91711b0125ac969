"""Error types raised by the reconstruction toolkit."""


class ReconstructionError(Exception):
    """Base class for every toolkit failure."""


class ShapeError(ReconstructionError, ValueError):
    """Array extents do not match what an operation expects."""


class ConfigError(ReconstructionError, ValueError):
    """A configuration value is missing, unknown or out of range."""


class UsageError(ReconstructionError):
    """An API or command was used out of order or without required inputs."""


class DivergenceError(ReconstructionError, ArithmeticError):
    """An iteration produced non-finite values or could not make progress.

    ``step`` is the iteration index at which the failure was detected and
    ``partial`` optionally carries whatever result was accumulated before it.
    """

    def __init__(self, message, step=None, partial=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step
        self.partial = partial


class FormatError(ReconstructionError):
    """A binary artifact is malformed; ``offset`` is the failing byte position."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset
