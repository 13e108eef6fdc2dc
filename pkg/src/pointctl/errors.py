"""Exception types raised across the package."""


class PointctlError(Exception):
    """Base class for all package-specific errors."""


class PointOutsideMesh(PointctlError):
    """A query point lies outside the meshed domain (beyond tolerance)."""


class UnsupportedDegree(PointctlError):
    """Requested quadrature exactness degree is not available."""


class Breakdown(PointctlError):
    """Iterative solver hit a breakdown (vanishing inner product)."""


class MaxIterations(PointctlError):
    """Iterative solver exhausted its iteration budget.

    The attached ``report`` carries the iteration count and last residual.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SingularMatrix(PointctlError):
    """Dense direct solve detected an (exactly) singular matrix."""


class DimensionMismatch(PointctlError):
    """Block or operand dimensions are inconsistent."""


class NoConvergence(PointctlError):
    """Newton iteration did not reach the requested residual norm.

    ``residual_log`` holds the per-iteration residual norms observed
    before giving up.
    """

    def __init__(self, message, residual_log=()):
        super().__init__(message)
        self.residual_log = tuple(residual_log)


class ParseError(PointctlError):
    """Config text could not be parsed; ``line`` is the 1-based line number."""

    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(PointctlError):
    """A config or problem invariant is violated; names the bad field."""
