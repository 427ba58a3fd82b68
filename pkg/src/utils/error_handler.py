"""
Error handling utilities for GroupTree

Provides:
- Structured error logging, with the level chosen by exception family
- Per-type error counts for run summaries
- A decorator that converts stray exceptions into the structured hierarchy
- CLI error formatting with exit status
"""

import logging
import traceback
from datetime import datetime, timezone
from functools import wraps
from typing import Any, Callable, Dict, Optional, Tuple, Type

from src.config.exceptions import (
    ConfigurationError,
    DataError,
    ErrorCode,
    GroupTreeException,
    SimulationError,
    SolverError,
    SystemError,
)

# First match wins; anything else is logged at ERROR as unexpected
SEVERITY: Tuple[Tuple[Tuple[Type[Exception], ...], int, str], ...] = (
    ((SystemError,), logging.CRITICAL, "CRITICAL_ERROR"),
    ((DataError, ConfigurationError), logging.WARNING, "INPUT_ERROR"),
    ((SimulationError, SolverError), logging.ERROR, "COMPUTATION_ERROR"),
)

UNKNOWN_EXIT_CODE = 2


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _severity(error: Exception) -> Tuple[int, str]:
    for types, level, label in SEVERITY:
        if isinstance(error, types):
            return level, label
    return logging.ERROR, "UNEXPECTED_ERROR"


class ErrorHandler:
    """Logs errors with their structured context and counts them per type"""

    def __init__(self, logger_name: str = __name__):
        self.logger = logging.getLogger(logger_name)
        self.error_counts: Dict[str, int] = {}
        self.last_errors: Dict[str, str] = {}

    @staticmethod
    def describe(error: Exception, context: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        info: Dict[str, Any] = {
            "error_type": type(error).__name__,
            "error_message": str(error),
            "timestamp": _now(),
            "context": context or {},
        }
        if isinstance(error, GroupTreeException):
            info["error_code"] = error.error_code.value
            info["structured_context"] = error.context
            info["cause"] = repr(error.cause) if error.cause is not None else None
        if error.__traceback__ is not None:
            info["stack_trace"] = "".join(traceback.format_exception(type(error), error, error.__traceback__))
        return info

    def log_error(self, error: Exception, context: Optional[Dict[str, Any]] = None) -> None:
        """
        Log error with structured context

        Args:
            error: The exception that occurred
            context: Where it happened (command, function, phase)
        """
        level, label = _severity(error)
        log = {
            logging.CRITICAL: self.logger.critical,
            logging.WARNING: self.logger.warning,
        }.get(level, self.logger.error)
        log(label, extra=self.describe(error, context))

        key = type(error).__name__
        self.error_counts[key] = self.error_counts.get(key, 0) + 1
        self.last_errors[key] = _now()

    def get_error_stats(self) -> Dict[str, Any]:
        return {
            "error_counts": dict(self.error_counts),
            "last_errors": dict(self.last_errors),
            "total_errors": sum(self.error_counts.values()),
        }


# Global error handler instance
error_handler = ErrorHandler()


def handle_exceptions(
    default_error_type: Type[GroupTreeException] = SystemError,
    default_error_code: ErrorCode = ErrorCode.DEPENDENCY_ERROR,
    reraise: bool = True,
    catch: Tuple[Type[BaseException], ...] = (Exception,),
):
    """
    Convert exceptions raised by the wrapped function into ``default_error_type``

    Structured errors pass through untouched. Only exceptions matching
    ``catch`` are converted; anything else propagates as raised.

    Args:
        default_error_type: Structured type for converted errors
        default_error_code: Error code for converted errors
        reraise: Raise after logging; otherwise return None
        catch: Exception types to convert
    """
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except GroupTreeException as e:
                error_handler.log_error(e, {"function": func.__name__})
                if reraise:
                    raise
                return None
            except catch as e:
                context = {
                    "function": func.__name__,
                    "original_type": type(e).__name__,
                    "original_error": str(e),
                }
                filename = getattr(e, "filename", None)
                if filename is not None:
                    context["path"] = str(filename)
                converted = default_error_type(f"{func.__name__} failed: {e}", default_error_code, context, cause=e)
                error_handler.log_error(converted)
                if reraise:
                    raise converted from e
                return None

        return wrapper
    return decorator


def format_cli_error(error: Exception) -> Dict[str, Any]:
    """
    Render an exception as the JSON document the CLI prints on stderr

    Returns:
        {"error": {code, message, context, timestamp}, "exit_code": int}
    """
    if isinstance(error, GroupTreeException):
        body = {"code": error.error_code.value, "message": error.message, "context": error.context}
        exit_code = error.get_exit_code()
    else:
        body = {"code": "UNKNOWN_ERROR", "message": str(error)}
        exit_code = UNKNOWN_EXIT_CODE
    body["timestamp"] = _now()
    return {"error": body, "exit_code": exit_code}
