"""Exception hierarchy shared by every module."""


class PeriodizeError(Exception):
    """Base class for all errors raised by this package."""


class NonPositiveDimension(PeriodizeError, ValueError):
    pass


class OrientationViolation(PeriodizeError, ValueError):
    """Doubly periodic cell with d < |e2|; the lattice must be rotated first."""


class CoincidentPoints(PeriodizeError, ValueError):
    pass


class MissingBeta(PeriodizeError, ValueError):
    pass


class InvalidOrder(PeriodizeError, ValueError):
    pass


class OrderOutOfRange(PeriodizeError, ValueError):
    pass


class PrecisionOutOfRange(PeriodizeError, ValueError):
    pass


class OutOfInterval(PeriodizeError, ValueError):
    pass


class NotDoubly(PeriodizeError, ValueError):
    pass


class RuleMismatch(PeriodizeError, ValueError):
    pass


class NotNeutral(PeriodizeError, ValueError):
    """Strengths violate the neutrality condition required by the kernel."""


class DimensionMismatch(PeriodizeError, ValueError):
    pass


class LengthMismatch(PeriodizeError, ValueError):
    pass


class GridTooCoarse(PeriodizeError, ValueError):
    pass


class NonUnitNormal(PeriodizeError, ValueError):
    pass


class NotConverged(PeriodizeError, RuntimeError):
    """Brute-force lattice sum failed its doubling check.

    ``partial`` and ``doubled`` hold the two partial sums that disagreed.
    """

    def __init__(self, message, partial=None, doubled=None):
        super().__init__(message)
        self.partial = partial
        self.doubled = doubled


class ParseError(PeriodizeError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
