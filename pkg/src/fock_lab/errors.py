"""Exception types shared across the package."""


class FockLabError(Exception):
    """Base class for library errors."""


class WindowError(FockLabError, ValueError):
    """A finite window of sequence points is too small to certify a result."""


class NumericResourceError(FockLabError, RuntimeError):
    """A requested accuracy cannot be reached within the resource cap."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required
