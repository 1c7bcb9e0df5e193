"""Exception hierarchy shared across the package.

CLI exit codes map onto these: ValidationError -> 2, NumericalError -> 3,
ConfigurationError -> 4.
"""


class CircaphaseError(Exception):
    """Base class for all package errors."""


class InputDomainError(CircaphaseError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ValidationError(CircaphaseError, ValueError):
    """Input data failed structural validation (parsing, monotonicity, ...)."""


class ConfigurationError(CircaphaseError, ValueError):
    """A configuration value is inconsistent or unusable."""


class NumericalError(CircaphaseError, RuntimeError):
    """A numerical procedure failed (solver breakdown, blow-up, ...)."""


class CovarianceDegeneracyError(NumericalError):
    """The square-root covariance factor became numerically singular."""


class InstabilityError(NumericalError):
    """A simulated trajectory blew up."""


class DegenerateCycleError(NumericalError):
    """A daily trajectory did not complete approximately one revolution."""


class DegenerateBeliefError(NumericalError):
    """A belief put non-negligible mass where the phase angle is undefined."""


class UndefinedAngleError(InputDomainError):
    """Projection onto the oscillation plane hit the origin."""
