"""
Custom exception classes for the gridfreq package.
"""

from typing import Any, List, Optional


class GridFreqError(Exception):
    """Base exception for all package errors."""
    pass


class ConfigurationError(GridFreqError):
    """Raised when settings or scenario options are invalid."""
    pass


class ValidationError(GridFreqError):
    """Raised when a scenario or network fails validation."""

    def __init__(self, message: str, errors: Optional[List[str]] = None):
        """
        Initialize ValidationError with the individual violations.

        Args:
            message: Summary of what went wrong
            errors: One entry per violation, JSON-pointer prefixed for schema errors
        """
        self.errors = list(errors or [])
        detail = "; ".join(self.errors)
        super().__init__(f"{message}: {detail}" if detail else message)


class DimensionError(ValidationError):
    """Raised when a state or input vector has the wrong shape."""
    pass


class NumericalError(GridFreqError):
    """Raised when a numerical procedure fails to converge or produces non-finite values."""

    def __init__(
        self,
        message: str,
        residual: Optional[float] = None,
        last_good: Optional[Any] = None,
    ):
        """
        Initialize NumericalError with solver context.

        Args:
            message: Error message describing what went wrong
            residual: Final residual norm of the failing solve, if any
            last_good: Last valid payload (e.g. a partial trajectory)
        """
        self.residual = residual
        self.last_good = last_good
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class InfeasibleDispatchError(GridFreqError):
    """Raised when the optimal supply and load control problem has no feasible point."""

    def __init__(self, total_disturbance: float, lower: float, upper: float):
        """
        Initialize InfeasibleDispatchError with the feasible balance range.

        Args:
            total_disturbance: Requested total uncontrollable demand step
            lower: Smallest achievable net supply
            upper: Largest achievable net supply
        """
        self.total_disturbance = total_disturbance
        self.lower = lower
        self.upper = upper
        super().__init__(
            f"Dispatch infeasible: total disturbance {total_disturbance:.6g} "
            f"outside achievable net supply range [{lower:.6g}, {upper:.6g}]"
        )
