"""Exception hierarchy shared by every module."""


class RwmError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(RwmError, ValueError):
    """A caller-supplied value violates an operation's precondition."""


class NotEnoughDataError(InvalidArgumentError):
    """Fewer observations than a rolling window needs."""


class DegenerateVolatilityError(RwmError, ArithmeticError):
    """Standard deviation is zero, so no s-score exists."""


class DataFormatError(InvalidArgumentError):
    """A malformed row in an input file; ``row`` is the 1-based data row."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class CertificationError(RwmError):
    """A proven bound was observed to fail. Always an implementation bug."""
