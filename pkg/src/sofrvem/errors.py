"""Exception types raised by the package."""


class SofrError(Exception):
    """Base class for all package errors."""


class InputError(SofrError, ValueError):
    """Malformed or inconsistent input data / configuration."""


class NumericalError(SofrError, ArithmeticError):
    """A numerical failure during fitting (singular system, non-finite ELBO)."""

    def __init__(self, message, terms=None):
        super().__init__(message)
        self.terms = terms
