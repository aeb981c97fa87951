"""Exception types raised across the package."""


class ChannelError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(ChannelError, ValueError):
    """A parameter lies outside its admissible domain."""


class ConfigurationError(ChannelError, ValueError):
    """Inconsistent or incomplete configuration."""


class NumericalError(ChannelError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance.

    ``residual`` carries the achieved error estimate when one is available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateDataError(ChannelError, ValueError):
    """Measured data cannot support the requested estimate (e.g. zero counts)."""
