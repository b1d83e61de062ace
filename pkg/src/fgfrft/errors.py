"""Exception hierarchy shared by every module.

Each class carries the process exit code the CLI maps it to.
"""


class FgfrftError(Exception):
    exit_code = 1


class ParameterError(FgfrftError, ValueError):
    """Invalid argument value (bad k, empty list, malformed flag)."""

    exit_code = 2


class SizeError(ParameterError):
    pass


class ShapeError(ParameterError):
    pass


class DomainError(ParameterError):
    pass


class NumericalError(FgfrftError, ArithmeticError):
    exit_code = 3


class OptimizerError(NumericalError):
    def __init__(self, message, epoch=None, index=None):
        super().__init__(message)
        self.epoch = epoch
        self.index = index


class CapacityError(FgfrftError, MemoryError):
    exit_code = 3


class ParseError(FgfrftError):
    """Malformed input file; ``offset`` is a byte offset or a 1-based line number."""

    exit_code = 4

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class PhaseMarginWarning(UserWarning):
    """Eigenphases close to +-pi: the truncated series loses accuracy there."""


class MeasurementWarning(UserWarning):
    """Timing configuration or clock too coarse for a trustworthy median."""
