"""Exception hierarchy shared across the package."""


class AhdmlError(Exception):
    """Base class for all package errors."""


class InvalidHorizonError(AhdmlError, ValueError):
    """Horizon tau must be strictly positive."""


class DomainError(AhdmlError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class DegenerateEstimandError(AhdmlError):
    """The average hazard is undefined: no events by tau or zero person-time."""


class DegenerateDataError(AhdmlError):
    """Dataset cannot support the requested computation (e.g. no follow-up)."""


class UnfittableError(AhdmlError):
    """A nuisance model cannot be fit on the given training data."""


class NonConvergenceError(AhdmlError):
    """An iterative fit failed to converge; carries the last iterate."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class InvalidPerturbationError(AhdmlError, ValueError):
    """A curve perturbation leaves the admissible range [0, 1]."""


class FoldInfeasibleError(AhdmlError):
    """No fold assignment satisfying the per-fold arm/event constraints."""


class PositivityError(AhdmlError):
    """Only a single treatment arm is present where both are required."""


class DataFormatError(AhdmlError, ValueError):
    """Malformed input data; carries the offending line number when known."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class ConfigError(AhdmlError, ValueError):
    """Invalid or unknown run-configuration keys/values."""
