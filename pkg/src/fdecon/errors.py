"""Exception hierarchy shared by every fdecon module."""


class FdeconError(Exception):
    """Base class for all library errors."""


class ParameterError(FdeconError, ValueError):
    """A parameter lies outside its admissible domain."""


class PreconditionError(FdeconError, ValueError):
    """An operation was called with inputs that violate its precondition."""


class CapacityError(PreconditionError):
    """A requested resolution level exceeds what the basis was built for."""


class IllPosedError(FdeconError, ArithmeticError):
    """A kernel energy vanishes at a frequency the estimator needs."""

    def __init__(self, message, m=None):
        super().__init__(message)
        self.m = m


class NumericalError(FdeconError, ArithmeticError):
    """Quadrature or another numerical routine failed to converge."""


class RegimeError(FdeconError, ValueError):
    """The requested smoothness regime contradicts the kernel's decay."""


class HypothesisError(FdeconError, ValueError):
    """Besov parameters violate the hypotheses of the rate bounds."""


class ConfigError(FdeconError, ValueError):
    """An experiment configuration failed validation."""
