"""Exception types raised across the package.

Everything derives from RenvarError so callers can catch one base class.
Optimizer non-convergence is deliberately NOT an exception; fits return
their best iterate with a ``converged`` flag and emit a warning.
"""


class RenvarError(Exception):
    """Base class for all renvar errors."""


class NotPSDError(RenvarError):
    """Matrix has an eigenvalue below the negative tolerance."""


class SingularMatrixError(RenvarError):
    """Matrix is numerically singular where an inverse power is required."""


class RankDeficientError(RenvarError):
    """Gram matrix X'VX is rank deficient in a projection."""


class TooShortError(RenvarError):
    """Series too short for the requested lag order."""


class SingularGramError(RenvarError):
    """Lagged second-moment matrix is numerically singular."""


class BadRankError(RenvarError):
    """Requested rank d outside the valid range."""


class BadDimsError(RenvarError):
    """Dimension tuple (d, u, p, q) violates 1 <= d <= u <= q or p < 1."""


class NotSemiorthogonalError(RenvarError):
    """Supplied basis fails the semiorthogonality check."""


class DegenerateCandidateError(RenvarError):
    """Objective undefined at a candidate basis (singular inner matrix)."""


class DimensionMismatchError(RenvarError):
    """Inputs disagree on dimensions."""


class ZeroSEError(RenvarError):
    """Reference standard error is zero; ratio undefined."""


class BadFamilyError(RenvarError):
    """Unknown innovation family name."""


class CannotStabilizeError(RenvarError):
    """Could not draw a stationary coefficient matrix within the retry budget."""


class BadHorizonError(RenvarError):
    """Forecast horizon must be a positive integer."""
