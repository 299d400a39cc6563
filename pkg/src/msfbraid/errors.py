"""Exception hierarchy.

Configuration problems (bad input, malformed protocols) and numerical
precondition failures map to distinct CLI exit codes.
"""


class MSFError(Exception):
    """Base class for all package errors."""


class ConfigError(MSFError, ValueError):
    """Invalid configuration or inconsistent array sizes."""


class ProtocolError(ConfigError):
    """Protocol source or move sequence is invalid.

    ``line`` and ``column`` are 1-based and ``None`` when the error is not
    tied to a source location (e.g. a compile-time move failure).
    """

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{where}: {message}"
        super().__init__(message)


class NumericError(MSFError, ArithmeticError):
    """Numerical precondition violated (non-finite input, closed gap, ...)."""


class GapClosedError(NumericError):
    """The bulk spectrum is gapless on the sampled momentum grid."""
