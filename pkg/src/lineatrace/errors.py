"""Error codes shared by the library, the HTTP service, and the CLI."""

from __future__ import annotations

from enum import Enum


class ErrorCode(str, Enum):
    UNKNOWN_COMPONENT = "UNKNOWN_COMPONENT"
    TIME_INVERSION = "TIME_INVERSION"
    EMPTY_OUTPUT_AND_INPUT = "EMPTY_OUTPUT_AND_INPUT"
    IO_OVERLAP = "IO_OVERLAP"
    INVALID_SPEC = "INVALID_SPEC"
    UNKNOWN_CHECK = "UNKNOWN_CHECK"
    UNKNOWN_POINTER = "UNKNOWN_POINTER"
    UNKNOWN_RUN = "UNKNOWN_RUN"
    NO_PRODUCER = "NO_PRODUCER"
    EMPTY_SAMPLE = "EMPTY_SAMPLE"
    VALIDATION = "VALIDATION"
    STORE_IO = "STORE_IO"
    NONEMPTY_TARGET = "NONEMPTY_TARGET"
    BIND_FAILURE = "BIND_FAILURE"
    BAD_REQUEST = "BAD_REQUEST"
    INTERNAL = "INTERNAL"
    UNREACHABLE = "UNREACHABLE"


class DomainError(Exception):
    """Raised for any contract violation that callers are expected to handle."""

    def __init__(self, code: ErrorCode, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class RunValidationError(DomainError):
    """Carries the complete list of violations found in one run submission.

    The primary code/message are the first violation; `violations` holds
    every (code, message) pair so callers never see a partial picture.
    """

    def __init__(self, violations: list[tuple[ErrorCode, str]]):
        code, message = violations[0]
        if len(violations) > 1:
            message = "; ".join(m for _, m in violations)
        super().__init__(code, message)
        self.violations = violations
