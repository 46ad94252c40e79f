"""Exception types shared across the package."""


class ContractError(ValueError):
    """Caller violated a precondition (shapes, lengths, topology constraints)."""


class CapacityError(ValueError):
    """A requested size exceeds what is available or supported."""


class DomainError(ValueError):
    """A value lies outside its mathematical domain (pixels, labels, classes)."""


class NumericError(ArithmeticError):
    """Non-finite values showed up during optimisation."""


class ParseError(ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(ValueError):
    """Well-formed but inconsistent input (mixed widths, missing labels, bad magic)."""
