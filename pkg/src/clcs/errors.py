"""Exception types raised across the package."""


class CSError(Exception):
    """Base class for package errors."""


class DimensionError(CSError, ValueError):
    """Array shapes or lengths are inconsistent."""


class ConfigError(CSError, ValueError):
    """A configuration value is out of its valid range."""


class DivergenceError(CSError, ArithmeticError):
    """Iterates grew without bound; usually the step scale is too large."""


class NumericalFailure(CSError, ArithmeticError):
    """A loss or iterate became non-finite.

    ``state`` carries a snapshot of the optimisation state for debugging.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class InputError(CSError, ValueError):
    """An input file is missing, unreadable or malformed."""
