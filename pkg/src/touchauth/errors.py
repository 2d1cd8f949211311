"""Exception hierarchy shared by the pipeline stages."""


class TouchAuthError(Exception):
    """Base class for all package errors."""


class IngestError(TouchAuthError, ValueError):
    """A source table could not be parsed or a row failed validation.

    ``row`` is the 1-based data-row index (the header is row 0) and
    ``column`` the offending column name, when known.
    """

    def __init__(self, message, row=None, column=None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        if location:
            message = f"{', '.join(location)}: {message}"
        super().__init__(message)
        self.row = row
        self.column = column


class FusionError(TouchAuthError, ValueError):
    """Touch and motion sources cannot be paired or joined."""


class SplitError(TouchAuthError, ValueError):
    """A user is not eligible for the per-user train/test protocol."""

    def __init__(self, message, user_id=None):
        super().__init__(message)
        self.user_id = user_id


class ConfigError(TouchAuthError, ValueError):
    """Invalid experiment or training configuration."""


class InvariantError(TouchAuthError, RuntimeError):
    """An internal consistency check failed."""


class TrainingError(TouchAuthError, ValueError):
    """Training data cannot produce a model (single class, non-finite values)."""
