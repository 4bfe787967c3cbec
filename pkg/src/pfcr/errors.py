"""Exception hierarchy shared by all pfcr modules."""


class PfcrError(Exception):
    """Base class for all library errors."""


class InvalidInputError(PfcrError, ValueError):
    """Arguments violate a documented precondition (bad shapes, ranges, flags)."""


class SingularMatrixError(PfcrError, ValueError):
    """A matrix that must be invertible / positive definite is numerically singular.

    The message names the offending matrix so CLI errors can report it.
    """


class DegenerateBasisError(PfcrError, ValueError):
    """The inverse-regression design matrix is rank deficient or unbuildable."""


class DegenerateInputError(PfcrError, ValueError):
    """Data carries no usable signal for the requested operation (e.g. Cov(X,Y)=0)."""
