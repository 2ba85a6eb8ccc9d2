"""Exception hierarchy.

Two broad classes matter to callers (and to the CLI exit-code contract):

* ``UsageError`` – the request itself is malformed (bad arguments, bad
  input files, capacity limits).  CLI exit code 2.
* ``NumericalError`` – the request was well-formed but the computation
  cannot produce a meaningful answer (degenerate scale, singular design,
  failed root bracketing, ...).  CLI exit code 3.
"""

from __future__ import annotations


class NoisesigError(Exception):
    """Base class for all package-specific errors."""


class UsageError(NoisesigError, ValueError):
    """Malformed request: bad arguments, bad input, capacity exceeded."""


class CapacityError(UsageError):
    """A size limit (e.g. subset enumeration 2**k) would be exceeded."""


class NumericalError(NoisesigError, ArithmeticError):
    """A well-formed computation failed for numerical reasons."""


class SingularDesignError(NumericalError):
    """Design matrix is rank deficient.

    Carries the (0-based) indices of design columns implicated in the
    near-null direction.
    """

    def __init__(self, message: str, columns: tuple[int, ...] = ()):
        super().__init__(message)
        self.columns = columns


class DegenerateScaleError(NumericalError):
    """Residual scale is zero; noise comparison is undefined."""


class DegenerateCurvatureError(NumericalError):
    """All residuals lie in the linear zone: sum of rho'' is zero."""


class NoRootError(NumericalError):
    """Bisection bracket never changed sign, even after widening."""

    def __init__(self, message: str, f_inner: float | None = None,
                 f_outer: float | None = None):
        super().__init__(message)
        self.f_inner = f_inner
        self.f_outer = f_outer
