"""Exception types raised across the package."""


class ConforError(Exception):
    """Base class for all package errors."""


class DomainError(ConforError, ValueError):
    """An argument lies outside the domain of the operation."""


class NonIntegrableError(ConforError, ValueError):
    """The 1/y size-weighting of a distribution is not integrable."""


class DecompositionError(ConforError, ValueError):
    """A covariance matrix could not be factorized (not PSD)."""


class UndefinedRiskError(ConforError, ValueError):
    """An expectation required by the loss does not exist."""


# moments and risk fail for the same reason (heavy tails), one type serves both
UndefinedMomentError = UndefinedRiskError


class InfeasibleMultiplierError(ConforError, ValueError):
    """A Lagrange multiplier lies outside the admissible interval."""


class InfeasibleConstraintError(ConforError, ValueError):
    """The constraint total cannot be reached by any admissible multiplier."""

    def __init__(self, message, low=None, high=None):
        super().__init__(message)
        self.low = low
        self.high = high


class PointwiseLossError(ConforError, ValueError):
    """A loss cannot be evaluated at some sampled outcome."""

    def __init__(self, message, dimension=None):
        super().__init__(message)
        self.dimension = dimension


class DegenerateTotalError(ConforError, ValueError):
    """The variance of the total is not positive."""


class ConfigError(ConforError, ValueError):
    """A scenario configuration failed validation."""
