"""
LongVie Core - Error Codes

Error codes, the exception hierarchy and the mapping from codes to process
exit codes. Every failure raised by the core modules is a LongVieError.
"""

from typing import Any, Dict, Optional


class ErrorCode:
    """Error code constants shared by the core modules and the CLI."""

    INVALID_INPUT = "INVALID_INPUT"
    NON_COVERABLE_LENGTH = "NON_COVERABLE_LENGTH"
    CONFIGURATION = "CONFIGURATION"
    FORMAT = "FORMAT"
    USAGE = "USAGE"
    INTERNAL = "INTERNAL_ERROR"


class LongVieError(Exception):
    """Base class for all LongVie errors."""

    code = ErrorCode.INTERNAL

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """
        Create a standardized error record.

        Returns:
            Dictionary with the error code, message and optional details
        """
        error: Dict[str, Any] = {
            "code": self.code,
            "message": self.message,
        }
        if self.details:
            error["details"] = self.details
        return {"error": error}


class InvalidInputError(LongVieError):
    """An operation received data violating its preconditions."""

    code = ErrorCode.INVALID_INPUT


class NonCoverableLengthError(LongVieError):
    """A video length cannot be tiled exactly by overlapping clips."""

    code = ErrorCode.NON_COVERABLE_LENGTH


class ConfigurationError(LongVieError):
    """A configuration object or file is invalid."""

    code = ErrorCode.CONFIGURATION


class FormatError(LongVieError):
    """A binary file is malformed. Carries the byte offset of the fault."""

    code = ErrorCode.FORMAT

    def __init__(self, message: str, offset: int, details: Optional[Dict[str, Any]] = None):
        merged = dict(details or {})
        merged["offset"] = offset
        super().__init__(f"{message} (at byte offset {offset})", merged)
        self.offset = offset


def get_exit_code_for_error(error_code: str) -> int:
    """
    Map error codes to process exit codes.

    Args:
        error_code: One of the ErrorCode constants

    Returns:
        2 for usage errors, 1 for every operational failure
    """
    mapping = {
        ErrorCode.USAGE: 2,
        ErrorCode.INVALID_INPUT: 1,
        ErrorCode.NON_COVERABLE_LENGTH: 1,
        ErrorCode.CONFIGURATION: 1,
        ErrorCode.FORMAT: 1,
        ErrorCode.INTERNAL: 1,
    }
    return mapping.get(error_code, 1)
