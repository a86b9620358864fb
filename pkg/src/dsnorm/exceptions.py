"""Exception hierarchy shared across the package."""


class DsnormError(Exception):
    """Base class for all package errors."""


class InputError(DsnormError, ValueError):
    """Malformed or non-finite input."""


class DimensionError(InputError):
    """Incompatible shapes or an out-of-range count."""


class MalformedFileError(InputError):
    """A file could not be parsed in the expected format."""


class DegenerateKernelError(InputError):
    """A kernel row sums to zero, so it cannot be normalized."""


class PreconditionError(InputError):
    """The kernel zero pattern does not admit a doubly-stochastic scaling."""


class NumericError(DsnormError, ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""


class SinkhornConvergenceError(NumericError):
    """Sinkhorn iteration hit ``max_iters`` before reaching the tolerance.

    The partial :class:`~dsnorm.normalize.SinkhornReport` is kept on
    ``report``. A larger kernel width usually fixes this.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
