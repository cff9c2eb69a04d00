"""Exception hierarchy shared by every module.

The command-line front end maps these onto exit codes: validation-type
errors exit with 2, numerical failures with 3.
"""


class ContextualValueError(Exception):
    """Base class for all package errors."""


class ValidationError(ContextualValueError, ValueError):
    """An input violates a documented invariant."""


class DimensionError(ValidationError):
    """Objects defined on incompatible spaces were combined."""


class ZeroProbabilityError(ContextualValueError, ZeroDivisionError):
    """Conditioning on an event of probability zero."""


class DegenerateDetectorError(ValidationError):
    """A detector carries no information about the system (a == b)."""


class NumericalFailure(ContextualValueError, ArithmeticError):
    """An iterative routine failed to converge or the problem is ill-posed."""


class NoSolutionError(NumericalFailure):
    """Pinned contextual values leave an inconsistent reduced system."""
