"""Exception hierarchy shared by every qsim module."""


class QsimError(ValueError):
    """Base class for all library errors."""


class ZeroVector(QsimError):
    pass


class NotHermitian(QsimError):
    pass


class DimensionMismatch(QsimError):
    pass


class InvalidState(QsimError):
    """Raised when deserialized or supplied data violate a type invariant."""


class ZeroProbabilityOutcome(QsimError):
    """Conditioning on an outcome whose Born probability is (numerically) zero."""


class BasisNotOrthonormal(QsimError):
    pass


class AngleOutOfRange(QsimError):
    pass


class IndistinguishableHypotheses(QsimError):
    """The two hypotheses predict the same interference statistics."""
