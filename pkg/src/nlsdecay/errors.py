"""Exception hierarchy shared across the toolkit."""


class NLSDecayError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(NLSDecayError, ValueError):
    """Inputs violate a documented precondition before any computation."""


class GridMismatchError(ValidationError):
    pass


class ConvergenceError(NLSDecayError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


class ZeroSolutionError(ConvergenceError):
    pass


class SingularShiftError(NLSDecayError):
    """(H - z) is singular or numerically so; z sits on the spectrum."""

    def __init__(self, message, shift=None, condition=None):
        super().__init__(message)
        self.shift = shift
        self.condition = condition


class ContourError(NLSDecayError):
    """A quadrature contour passes too close to the spectrum."""


class RankIndeterminateError(NLSDecayError):
    """Singular values straddle the rank threshold band."""

    def __init__(self, message, gap_ratio=None):
        super().__init__(message)
        self.gap_ratio = gap_ratio


class DegenerateStripError(ValidationError):
    pass
