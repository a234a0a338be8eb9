"""Exception hierarchy shared by every module."""


class EEGReachError(Exception):
    """Base class for all package errors."""


class InputError(EEGReachError, ValueError):
    """Bad data handed to an operation (wrong shape, out-of-range label, ...)."""


class DimensionError(InputError):
    """Tensor extents do not agree."""


class ConfigurationError(EEGReachError, ValueError):
    """Invalid layer, model, filter or run configuration."""


class DesignError(ConfigurationError):
    """A filter cannot be designed with the requested parameters."""


class NumericError(EEGReachError, ArithmeticError):
    """Non-finite values or a failed factorization."""


class OptimizationError(NumericError):
    """Training diverged (NaN loss or non-finite gradient)."""


class StateError(EEGReachError, RuntimeError):
    """An object was used before it was fitted."""


class FormatError(EEGReachError, ValueError):
    """A binary file could not be parsed.

    Parameters
    ----------
    message : str
        What went wrong.
    offset : int
        Byte offset at which the problem was detected.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
