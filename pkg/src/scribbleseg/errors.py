"""Exception types shared across the package.

The CLI maps these onto process exit codes (see ``cli.EXIT_CODES``) and the
HTTP service maps them onto status codes, so raising the most specific class
matters.
"""

from __future__ import annotations


class ScribbleSegError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(ScribbleSegError):
    """Malformed or out-of-contract input (bad image, bad codes, bad params)."""


class MissingSeedsError(InvalidInputError):
    """Foreground or background seed set is empty where both are required."""


class ConflictingSeedsError(InvalidInputError):
    """A pixel is marked both foreground and background."""


class DimensionMismatchError(InvalidInputError):
    """Two rasters that must share dimensions do not."""


class FormatError(InvalidInputError):
    """A file is not in one of the documented on-disk formats."""


class ConvexityViolationError(ScribbleSegError):
    """Boundary trade-off outside [0, min edge weight].

    Values above the minimum edge weight can make the penalized objective
    non-convex, so they are rejected rather than clamped.
    """

    def __init__(self, lam: float, bound: float):
        self.lam = lam
        self.bound = bound
        super().__init__(
            f"boundary trade-off {lam!r} outside [0, {bound!r}] "
            f"(min edge weight of this image)"
        )


class SolverFailureError(ScribbleSegError):
    """Iterative solve did not reach the requested tolerance."""

    def __init__(self, residual: float, iterations: int, message: str = ""):
        self.residual = residual
        self.iterations = iterations
        text = message or (
            f"solver did not converge: relative residual {residual:.3e} "
            f"after {iterations} iterations"
        )
        super().__init__(text)


class NotPositiveDefiniteError(ScribbleSegError):
    """Direct factorization found the system matrix indefinite."""


class SingularSystemError(ScribbleSegError):
    """Dense elimination hit a singular matrix."""


class OracleTooLargeError(ScribbleSegError):
    """Dense verification oracle refused an over-size system."""
