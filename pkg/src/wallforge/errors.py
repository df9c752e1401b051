"""Exception hierarchy for wallforge."""

from __future__ import annotations


class WallforgeError(Exception):
    """Base class for every domain error raised by wallforge."""


class NonPositiveValueError(WallforgeError):
    """Raised when a weight segment value is not strictly positive."""


class UnsortedBreakpointsError(WallforgeError):
    """Raised when weight breakpoints are not strictly increasing."""


class DomainTooSmallError(WallforgeError):
    """Raised when the truncated domain cannot hold the requested data."""


class NoConvergenceError(WallforgeError):
    """Raised when an iterative solver misses its residual tolerance."""

    def __init__(self, message: str, *, iterations: int, residual: float) -> None:
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class MonotonicityViolationError(WallforgeError):
    """Raised when a converged wall profile is not non-decreasing."""


class ProfileNotConvergedError(WallforgeError):
    """Raised when an operator is requested for a non-stationary profile."""


class EigenNoConvergenceError(WallforgeError):
    """Raised when the tridiagonal eigensolver fails."""


class NonPositivePsiError(WallforgeError):
    """Raised when a Hardy ground state is not strictly positive."""


class NotTangentialError(WallforgeError):
    """Raised when a variation is not orthogonal to the sphere map."""


class NoSignChangeError(WallforgeError):
    """Raised when a bracketing scan finds no sign change."""


class ConfigParseError(WallforgeError):
    """Raised when a run configuration cannot be read or validated."""
