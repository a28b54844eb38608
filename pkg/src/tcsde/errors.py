"""Exception hierarchy shared by every module."""


class TcsdeError(Exception):
    """Base class for all package errors."""


class ParameterError(TcsdeError, ValueError):
    """A parameter lies outside its admissible domain."""


class DomainError(TcsdeError, ValueError):
    """An evaluation point lies outside the domain of a function."""


class CoverageError(TcsdeError):
    """A subordinator path does not reach past the horizon."""


class ConfigurationError(TcsdeError):
    """Truncation policy or model configuration is inconsistent."""


class ModelError(TcsdeError):
    """A model coefficient produced a non-finite value."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NumericalOverflowError(TcsdeError, ArithmeticError):
    """A scheme step produced a non-finite or runaway state."""

    def __init__(self, message, t=None, x=None):
        super().__init__(message)
        self.t = t
        self.x = x


class ExperimentError(TcsdeError):
    """Too many trajectories failed within one experiment."""


class ResourceError(TcsdeError):
    """A hard iteration limit was exceeded."""
