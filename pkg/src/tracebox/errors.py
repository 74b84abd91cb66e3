"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes, so new exceptions should subclass the
closest existing category rather than ``TraceboxError`` directly.
"""


class TraceboxError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TraceboxError):
    """Invalid configuration or arguments (CLI exit code 2)."""


class FormatError(TraceboxError):
    """Malformed on-disk data such as a bag or ledger line (CLI exit code 3)."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class LedgerError(TraceboxError):
    """Ledger-side rejection or unavailability (CLI exit code 4)."""
