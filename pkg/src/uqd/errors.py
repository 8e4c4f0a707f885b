"""Exception hierarchy shared across the package."""


class UqdError(Exception):
    """Base class for all errors raised by this package."""


class InputError(UqdError):
    """Malformed or unreadable input: documents, files, CLI arguments."""


class ParseError(InputError):
    """A document could not be decoded; the message carries field context."""


class ValidationError(UqdError):
    """Well-formed input that violates a mathematical precondition."""


class NumericalError(UqdError):
    """A numerical procedure failed to meet its accuracy contract."""
