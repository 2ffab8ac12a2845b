"""Exception hierarchy shared by all modules."""


class QBMError(Exception):
    """Base class for all package errors."""


class UnphysicalStateError(QBMError, ValueError):
    """Covariance matrix violates the uncertainty principle (nu_minus < 1/2)."""


class NumericDomainError(QBMError, ArithmeticError):
    """A closed form left its real domain beyond tolerance."""


class DegenerateFormError(QBMError, ArithmeticError):
    """Standard-form elements cannot be recovered from the invariants."""


class ZeroParameterError(QBMError, ValueError):
    """The Duan weight parameter must be nonzero."""


class DivergentKernelError(QBMError, ValueError):
    """The noise kernel K(t) diverges at t = 0."""


class QuadratureError(QBMError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""


class IntegratorError(QBMError, ArithmeticError):
    """Time integration failed (step-size underflow or non-finite state)."""


class NoBracketError(QBMError, ArithmeticError):
    """A root search found no sign change on its search domain."""


class NotConvergedError(QBMError, ArithmeticError):
    """A trajectory tail is not stationary to the requested drift."""


class ConfigError(QBMError, ValueError):
    """Invalid scenario configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
