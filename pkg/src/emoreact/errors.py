"""Exception hierarchy shared across the package.

The CLI maps these to exit codes: ConfigError -> 1, DataError -> 2,
anything else -> 3.
"""

from __future__ import annotations


class EmoreactError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(EmoreactError):
    """Invalid configuration: bad flags, unknown keys, missing paths."""


class DataError(EmoreactError):
    """Invalid input data: malformed files, bad records, empty corpora."""


class FeedParseError(DataError):
    """A reaction feed document is not valid JSON."""

    def __init__(self, message: str, byte_offset: int | None = None):
        super().__init__(message)
        self.byte_offset = byte_offset


class RecordError(DataError):
    """A single record inside an otherwise readable file is invalid.

    ``index`` is the zero-based record index for array inputs, or the
    one-based line number for line-oriented files (see ``unit``).
    """

    def __init__(self, message: str, index: int, unit: str = "record"):
        super().__init__(f"{unit} {index}: {message}")
        self.index = index
        self.unit = unit


class StageError(EmoreactError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
