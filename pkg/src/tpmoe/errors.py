"""Exception types shared across the package."""


class TPMoEError(Exception):
    """Base class for all package errors."""


class InputError(TPMoEError, ValueError):
    """Malformed user input: bad shapes, unparsable files, invalid config."""


class NumericalError(TPMoEError, ArithmeticError):
    """A linear-algebra or sampling step could not be completed.

    Attributes
    ----------
    jitters : tuple of float
        Diagonal jitter levels that were attempted before giving up.
    """

    def __init__(self, message, jitters=()):
        super().__init__(message)
        self.jitters = tuple(jitters)
