"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: config errors -> 2, numerical
failures -> 3, physics-invariant breaches -> 4.
"""


class QfdError(Exception):
    """Base class for all package errors."""


class DomainError(QfdError, ValueError):
    """Input outside the mathematical domain of an operation."""


class GridError(QfdError, ValueError):
    """Malformed sample grid (unsorted, duplicated or mismatched abscissae)."""


class BracketError(QfdError, ValueError):
    """Root bracket does not enclose a sign change."""


class ConvergenceError(QfdError, RuntimeError):
    """Iterative scheme exhausted its budget.  Carries the best estimate."""

    def __init__(self, message, best_estimate=None, error_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate


class PhysicsError(QfdError, RuntimeError):
    """A physical invariant (positivity, trace, horizon) broke down."""


class ConfigError(QfdError, ValueError):
    """Invalid or unresolvable run configuration."""
