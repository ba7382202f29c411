"""Exception hierarchy shared by every evpos module."""


class EvposError(Exception):
    """Base class for all errors raised by evpos."""


class DimensionError(EvposError, ValueError):
    """Operands have incompatible shapes."""


class PreconditionError(EvposError, ValueError):
    """An input violates the documented precondition of an operation."""


class SpectrumError(EvposError):
    """A resolvent was requested at (or numerically at) a spectral value."""


class NumericalFailure(EvposError):
    """A numerical routine failed to converge or two independent routes disagree."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConfigError(EvposError, ValueError):
    """A scenario configuration could not be parsed or validated."""
