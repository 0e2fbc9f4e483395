"""Exception types shared across the toolkit."""


class LactError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(LactError, ValueError):
    """An argument violates a documented precondition."""


class FormatError(LactError, ValueError):
    """A file does not conform to its on-disk format."""


class DivergedError(LactError, ArithmeticError):
    """An iterative solver produced non-finite values."""


class UndefinedMetricError(LactError, ValueError):
    """A quality metric is undefined for the given inputs."""


class TapeError(LactError, RuntimeError):
    """The differentiation tape is malformed (e.g. contains a cycle)."""
