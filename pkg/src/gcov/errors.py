"""Exception hierarchy shared by every gcov module."""


class GcovError(ValueError):
    """Base class for all errors raised by the package."""


class LagTooLarge(GcovError):
    pass


class DegenerateSeries(GcovError):
    pass


class IllConditioned(GcovError):
    pass


class ShapeMismatch(GcovError):
    pass


class TooShort(GcovError):
    pass


class DomainError(GcovError):
    pass


class UnknownModel(GcovError):
    pass


class BoundaryTheta(GcovError):
    pass


class SingularOmega(GcovError):
    pass


class ExplosivePolynomial(GcovError):
    pass


class IdentificationError(GcovError):
    """Order condition K^2 H >= dim(theta) violated."""


class ParseError(GcovError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class EmptyInput(GcovError):
    pass


class NoConvergence(GcovError):
    """Optimizer did not converge; the best partial result rides along."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
