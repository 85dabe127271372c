"""Exception types raised across the package."""


class DPPError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(DPPError, ValueError):
    """A matrix failed the Cholesky positive-definiteness test.

    ``pivot`` is the 1-based order of the failing leading minor (LAPACK
    convention) and ``value`` the offending Schur-complement pivot when known.
    """

    def __init__(self, pivot, value=None):
        self.pivot = int(pivot)
        self.value = value
        msg = f"matrix is not positive definite (pivot {self.pivot}"
        if value is not None:
            msg += f", value {value:.3e}"
        super().__init__(msg + ")")


class IndexOutOfRange(DPPError, IndexError):
    pass


class DimensionMismatch(DPPError, ValueError):
    pass


class NoConvergence(DPPError, RuntimeError):
    pass


class SingularSubmatrix(DPPError, ValueError):
    """The principal submatrix for observation ``index`` (0-based) is not PD."""

    def __init__(self, index, cause=None):
        self.index = int(index)
        self.cause = cause
        super().__init__(f"kernel restricted to observation {self.index} is singular")


class SingularIterate(DPPError, ValueError):
    pass


class GroundSetTooLarge(DPPError, ValueError):
    pass


class InvalidCount(DPPError, ValueError):
    pass


class EigenFailure(DPPError, RuntimeError):
    pass


class GenerationFailed(DPPError, RuntimeError):
    pass


class ParseError(DPPError, ValueError):
    def __init__(self, line, message, path=None):
        self.line = int(line)
        self.path = path
        where = f"{path}:{self.line}" if path is not None else f"line {self.line}"
        super().__init__(f"{where}: {message}")
