"""Exception hierarchy.

Validation problems (bad input, out-of-domain arguments) derive from
``ValidationError``; numerical failures derive from ``NumericalError``.
The CLI maps the first family to exit code 1 and the second to exit code 2.
"""

from __future__ import annotations


class CCDistError(Exception):
    """Base class for all library errors."""


class ValidationError(CCDistError, ValueError):
    pass


class NumericalError(CCDistError, ArithmeticError):
    pass


class NotSkewSymmetric(ValidationError):
    def __init__(self, index: int):
        super().__init__(f"generator {index} is not skew-symmetric")
        self.index = index


class LinearlyDependentFamily(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class PoleError(DomainError):
    def __init__(self, s: float, message: str | None = None):
        super().__init__(message or f"pole at s={s!r}")
        self.s = s


class PoleAtEigenvalue(PoleError):
    def __init__(self, eigenvalue: float):
        super().__init__(eigenvalue, f"function has a pole at eigenvalue {eigenvalue!r}")
        self.eigenvalue = eigenvalue


class OddInput(ValidationError):
    pass


class OutOfRegion(ValidationError):
    pass


class BadTheta(ValidationError):
    pass


class NotACriticalPoint(ValidationError):
    pass


class NonConvergence(NumericalError):
    def __init__(self, iterations: int, residual: float, message: str = "no convergence"):
        super().__init__(f"{message} after {iterations} iterations (residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class NewtonFailure(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class BranchTrackingFailure(NumericalError):
    pass


class InternalConsistencyError(NumericalError):
    pass
