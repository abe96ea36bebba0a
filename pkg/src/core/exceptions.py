"""
Exception hierarchy shared by the simulator, the codec and the harness.

ValueError subclasses signal bad input or configuration (CLI exit code 1);
RuntimeError subclasses signal a broken invariant during execution (exit code 2).
"""


class CodedComputeError(Exception):
    """Base class for every error raised by this package."""


class JobValidationError(CodedComputeError, ValueError):
    """Job parameters violate a divisibility, range or payload constraint."""


class FieldError(CodedComputeError, ValueError):
    """Finite-field construction or arithmetic failure."""


class CodecError(CodedComputeError, ValueError):
    """Exclusive-set, segmentation or encoding precondition failure."""


class DecodeError(CodedComputeError, RuntimeError):
    """A receiver could not recover the segments addressed to it."""


class ShuffleError(CodedComputeError, RuntimeError):
    """The shuffle left a node without a value it has to reduce."""


class InvariantViolation(CodedComputeError, RuntimeError):
    """An oracle or fixture comparison failed."""
