"""Exception hierarchy shared across the package.

Two broad families matter to callers: validation failures (bad inputs or
configurations, CLI exit code 2) and numerical failures (a computation that
was attempted but did not succeed, CLI exit code 3).
"""


class ChirplockError(Exception):
    """Base class for all package errors."""


class ValidationError(ChirplockError):
    """Inputs violate a structural precondition (degrees, parity, config keys)."""


class DomainError(ValidationError):
    """A state or level lies outside the admissible amplitude region."""


class UnsupportedRegimeError(ValidationError):
    """Parameters fall in a regime the reduction does not cover (e.g. h = 0)."""


class NumericalError(ChirplockError):
    """Base class for failures of a numerical procedure."""


class BracketError(NumericalError):
    """Root bracketing failed: no sign change over the supplied interval."""


class ConvergenceError(NumericalError):
    """An iteration exhausted its budget without meeting its tolerance."""


class EvaluationError(NumericalError):
    """An integrand or right-hand side returned a non-finite value."""

    def __init__(self, message: str, abscissa: float | None = None):
        super().__init__(message)
        self.abscissa = abscissa


class AccuracyError(NumericalError):
    """A computed quantity failed its internal accuracy diagnostic."""


class PreAsymptoticError(NumericalError):
    """The resonance condition has no solution yet at the requested time."""

    def __init__(self, message: str, t_min: float | None = None):
        super().__init__(message)
        self.t_min = t_min


class DegenerateRootError(NumericalError):
    """A phase root has a derivative too small to classify."""


class BlowUpError(NumericalError):
    """A trajectory exceeded the overflow guard."""

    def __init__(self, message: str, last_valid_time: float | None = None):
        super().__init__(message)
        self.last_valid_time = last_valid_time
