"""Exception hierarchy shared by all gqbm modules.

Each failure class maps to a distinct CLI exit code, so user-facing errors
stay diagnosable from scripts:

    ValidationError / ContractViolationError -> exit 2 (bad input or misuse)
    InstabilityError / SingularityError      -> exit 3 (dynamics blew up)
    NumericalQualityError / QuadratureConvergenceError -> exit 4
"""


class GqbmError(Exception):
    """Base class for all package errors."""


class ValidationError(GqbmError, ValueError):
    """Invalid parameter values or malformed configuration."""


class ContractViolationError(GqbmError, ValueError):
    """An operation was called with inputs that break its preconditions."""


class InstabilityError(GqbmError, RuntimeError):
    """The propagated solution grew beyond a physical bound.

    Raised with the first offending step index and time in the message so
    runaway pair-production regimes are reported where they start.
    """


class SingularityError(GqbmError, RuntimeError):
    """A matrix inversion hit an ill-conditioned propagator.

    Carries the earliest time at which the condition estimate crossed the
    threshold.
    """


class NumericalQualityError(GqbmError, RuntimeError):
    """An internal consistency monitor exceeded its tolerance.

    Examples: commutator drift of second moments, loss of the conjugation
    structure of the mean equation.
    """


class QuadratureConvergenceError(GqbmError, RuntimeError):
    """A frequency-integral rule failed its self-refinement check."""
