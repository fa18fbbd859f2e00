"""Exception types shared across the library.

The command line front end maps each class to a distinct exit code, so
raising the right type matters more than the message wording.
"""


class LexselError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(LexselError):
    """A text input (CSV matrix, config file) could not be parsed.

    Carries an optional line number so diagnostics can point at the
    offending row.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ShapeError(LexselError):
    """Array inputs have incompatible or invalid shapes."""


class ConfigError(LexselError):
    """A configuration value is missing, unknown, or out of range."""


class InstanceTooLargeError(LexselError):
    """An exact computation was requested on an instance beyond its guard."""
