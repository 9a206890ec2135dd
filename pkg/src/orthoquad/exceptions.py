"""Exception types raised across the package."""


class OrthoquadError(Exception):
    """Base class for all package-specific errors."""


class SymmetryError(OrthoquadError):
    """A matrix required to be symmetric is not, beyond tolerance."""


class RankDeficiencyError(OrthoquadError):
    """An input required to have full column rank is numerically rank deficient."""


class ConvergenceFailureError(OrthoquadError):
    """An iterative method hit its iteration cap before reaching tolerance.

    Carries the best iterate seen (``best``), its residual norm
    (``residual``) and the number of iterations spent (``iterations``).
    """

    def __init__(self, message, best=None, residual=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.iterations = iterations


class IndefiniteOperatorError(OrthoquadError):
    """Negative curvature was detected in an operator assumed positive semidefinite.

    Carries the iterate at detection time (``partial``) and the curvature
    value (``curvature``).
    """

    def __init__(self, message, partial=None, curvature=None):
        super().__init__(message)
        self.partial = partial
        self.curvature = curvature


class DegenerateInstanceError(OrthoquadError):
    """A quantity that must be strictly positive (sigma, reduced rank) vanished."""


class NotDegenerateError(OrthoquadError):
    """The closed-form degenerate construction was asked for on a non-degenerate input."""


class NormBoundError(OrthoquadError):
    """The spectral-norm bound required by the degenerate construction is violated."""


class NotCriticalError(OrthoquadError):
    """A point assumed to be first-order critical has a large residual."""


class CardinalityError(OrthoquadError):
    """Class cardinalities are infeasible for the given labels."""


class DuplicatePointsError(OrthoquadError):
    """Duplicate input points make nearest-neighbor distances degenerate."""


class ConductanceUndefinedError(OrthoquadError):
    """Conductance was requested for an empty or full vertex subset."""


class FormatError(OrthoquadError):
    """An on-disk artifact does not conform to its expected format."""
