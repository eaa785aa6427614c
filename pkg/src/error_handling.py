"""
Error handling utilities for the LGV localization toolkit.

Every failure the command line can report maps to one exception class and
one exit code:

  * ConfigError  – 2, invalid or incomplete run configuration
  * DataIOError  – 3, a file could not be read or written
  * DataError    – 4, input data is malformed or violates a contract
"""

import logging
from typing import Optional

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4


class LocalizationError(Exception):
    """Base exception for localization errors"""

    exit_code = EXIT_UNEXPECTED


class ConfigError(LocalizationError):
    """Invalid run configuration.  ``field`` is the dotted path of the
    offending entry (``vehicle.h``, ``pf.M``) when one can be named."""

    exit_code = EXIT_CONFIG

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class DataIOError(LocalizationError):
    """Exception for unreadable or unwritable files"""

    exit_code = EXIT_IO


class DataError(LocalizationError):
    """Exception for malformed input data"""

    exit_code = EXIT_DATA


class MalformedRecord(DataError):
    """A JSONL or CSV line that does not parse."""

    def __init__(self, path: str, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no


class InsufficientMatches(DataError):
    """Fewer than two detections matched the map; no laser fix possible."""

    def __init__(self, n_matched: int):
        super().__init__(f"laser fix needs >= 2 matched reflectors, got {n_matched}")
        self.n_matched = n_matched


class TimeOrderError(DataError):
    """A sensor frame arrived earlier than the one before it."""

    def __init__(self, t: float, last_t: float):
        super().__init__(f"frame at t={t!r} arrived after t={last_t!r}")
        self.t = t
        self.last_t = last_t


class SpanError(DataError):
    """An estimate timestamp lies outside the ground-truth time span."""


def exit_code_for(error: BaseException) -> int:
    """Return the process exit code the CLI uses for *error*."""
    if isinstance(error, LocalizationError):
        return error.exit_code
    if isinstance(error, ValueError):
        return EXIT_DATA
    if isinstance(error, OSError):
        return EXIT_IO
    return EXIT_UNEXPECTED


def handle_error(error: BaseException, context: str = "") -> int:
    """Log *error* and return its exit code.  Unexpected exceptions also get
    their traceback logged at DEBUG level."""
    log = logging.getLogger("lgv_localization")
    log.error("Error in %s: %s", context or "run", error)
    code = exit_code_for(error)
    if code == EXIT_UNEXPECTED:
        log.debug("traceback", exc_info=error)
    return code
