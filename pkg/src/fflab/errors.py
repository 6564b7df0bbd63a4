"""Exception hierarchy shared by every module."""


class FFLabError(Exception):
    """Base class for all package errors."""


class DimensionError(FFLabError):
    """Array shapes are incompatible for the requested operation."""


class UsageError(FFLabError):
    """The caller violated an API precondition (empty data, label out of range, ...)."""


class FormatError(FFLabError):
    """A binary or text container is malformed.

    ``offset`` is the byte offset at which parsing failed, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(FFLabError):
    """Bad experiment configuration (unknown key, type mismatch, missing key)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataError(FFLabError):
    """Dataset files are missing or unreadable."""
