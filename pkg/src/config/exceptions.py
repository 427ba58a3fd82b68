"""
Exception hierarchy for GroupTree

This module provides structured exception handling with:
- Specific exception types for each stage of the estimation pipeline
- Error codes for diagnostics and log filtering
- Structured error context for logging
- Process exit code mapping for the command line front end
"""

from typing import Dict, Any, Optional
from enum import Enum


class ErrorCode(Enum):
    """Structured error codes for diagnostics"""

    # Corpus and sample errors (1000-1999)
    CORPUS_NOT_FOUND = "DATA_1001"
    CORPUS_HEADER_INVALID = "DATA_1002"
    CORPUS_UNKNOWN_TOKEN = "DATA_1003"
    CORPUS_EMPTY = "DATA_1004"
    SAMPLE_INVALID = "DATA_1005"
    ALPHABET_INVALID = "DATA_1006"
    ALPHABET_MISMATCH = "DATA_1007"
    MODEL_FILE_INVALID = "DATA_1008"

    # Estimation errors (2000-2999)
    TRIE_DEPTH_INVALID = "EST_2001"
    GROUP_OUT_OF_RANGE = "EST_2002"
    RADIUS_INPUT_INVALID = "EST_2003"
    RADIUS_HYPOTHESIS_FAILED = "EST_2004"
    NODE_NOT_VISIBLE = "EST_2005"
    ROOT_NOT_REMOVABLE = "EST_2006"
    INSUFFICIENT_HISTORY = "EST_2007"
    TREE_INVALID = "EST_2008"
    NORM_INPUT_INVALID = "EST_2009"

    # Simulation and oracle errors (3000-3999)
    TRUE_MODEL_INVALID = "SIM_3001"
    STATIONARY_SOLVE_FAILED = "SIM_3002"
    RENEWAL_TRUNCATION = "SIM_3003"
    ORACLE_BUDGET_EXCEEDED = "SIM_3004"
    INSUFFICIENT_PAST = "SIM_3005"

    # Downstream solver errors (4000-4999)
    DP_STATE_BUDGET_EXCEEDED = "SOLVE_4001"
    DP_NOT_CONVERGED = "SOLVE_4002"
    DP_SPEC_INVALID = "SOLVE_4003"
    EFFECT_QUERY_INVALID = "SOLVE_4004"

    # Configuration errors (5000-5999)
    CONFIG_NOT_FOUND = "CFG_5001"
    CONFIG_INVALID = "CFG_5002"
    CONDITION_VIOLATED = "CFG_5003"
    USAGE_ERROR = "CFG_5004"

    # System errors (6000-6999)
    DEPENDENCY_ERROR = "SYS_6001"
    RESOURCE_EXHAUSTED = "SYS_6002"
    OUTPUT_WRITE_FAILED = "SYS_6003"


class GroupTreeException(Exception):
    """Base exception for all GroupTree specific errors"""

    def __init__(
        self,
        message: str,
        error_code: ErrorCode,
        context: Optional[Dict[str, Any]] = None,
        cause: Optional[Exception] = None
    ):
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.context = context or {}
        self.cause = cause

    def to_dict(self) -> Dict[str, Any]:
        """Convert exception to structured dictionary for logging/CLI output"""
        return {
            "error_code": self.error_code.value,
            "message": self.message,
            "context": self.context,
            "cause": str(self.cause) if self.cause else None
        }

    def get_exit_code(self) -> int:
        """Map exception to a process exit status"""
        return 2


class DataError(GroupTreeException):
    """Malformed corpora, samples, alphabets or model files"""


class EstimationError(GroupTreeException):
    """Errors while counting, computing radii or pruning"""


class InsufficientHistoryError(EstimationError):
    """A past is too short to resolve its terminal node"""

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message, ErrorCode.INSUFFICIENT_HISTORY, context)


class RadiusFallback(EstimationError):
    """The hypothesis of the L2 radius does not hold; callers use INF radii"""

    def __init__(self, alpha: float):
        super().__init__(
            f"L2 radius requires alpha < 3, got alpha={alpha:.4f}",
            ErrorCode.RADIUS_HYPOTHESIS_FAILED,
            {"alpha": alpha}
        )
        self.alpha = alpha


class SimulationError(GroupTreeException):
    """Errors in true models, simulators and oracle computations"""


class SolverError(GroupTreeException):
    """Errors in value iteration and effect estimation"""


class ConfigurationError(GroupTreeException):
    """Invalid configuration files, parameters or command usage"""

    def get_exit_code(self) -> int:
        return 1


class SystemError(GroupTreeException):
    """System-level dependency and resource errors"""

    def get_exit_code(self) -> int:
        status_mapping = {
            ErrorCode.OUTPUT_WRITE_FAILED: 2,
            ErrorCode.RESOURCE_EXHAUSTED: 2,
            ErrorCode.DEPENDENCY_ERROR: 2
        }
        return status_mapping.get(self.error_code, 2)


# Convenience functions for common error patterns
def data_error(message: str, error_code: ErrorCode, **context) -> DataError:
    """Create a data error with context"""
    return DataError(message, error_code, context)


def estimation_error(message: str, error_code: ErrorCode, **context) -> EstimationError:
    """Create an estimation error with context"""
    return EstimationError(message, error_code, context)


def simulation_error(message: str, error_code: ErrorCode, **context) -> SimulationError:
    """Create a simulation error with context"""
    return SimulationError(message, error_code, context)


def solver_error(message: str, error_code: ErrorCode, **context) -> SolverError:
    """Create a solver error with context"""
    return SolverError(message, error_code, context)


def config_error(message: str, error_code: ErrorCode = ErrorCode.CONFIG_INVALID, **context) -> ConfigurationError:
    """Create a configuration error with context"""
    return ConfigurationError(message, error_code, context)
