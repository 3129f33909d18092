"""Exception types shared across the package.

User-facing errors split into two families: invalid inputs (bad arguments,
malformed files) and numerical failures (rank deficiency, non-convergence).
The CLI maps the first family to exit code 1 and the second to exit code 2.
"""


class TirexError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(TirexError, ValueError):
    """An argument or input file violates a documented precondition."""


class NumericalError(TirexError, ArithmeticError):
    """A numerically well-posed answer could not be produced."""


class RankDeficiencyError(NumericalError):
    """A covariance-like matrix has an eigenvalue below the rank floor."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class ConvergenceError(NumericalError):
    """An iterative routine did not converge within its iteration cap."""
