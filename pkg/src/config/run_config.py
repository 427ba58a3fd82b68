"""
Run configuration files.

A run configuration is a YAML document. Estimation knobs may be given flat
at the top level (fam, k, r, m, c, delta, radius_mode, gamma) or nested
under ``estimation``; ``fit``, ``study``, ``dp`` and ``avem`` sections
configure the respective commands. Strings may reference environment
variables as ``${VAR}`` or ``${VAR:default}``.
"""

import logging
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.config.exceptions import ErrorCode, config_error
from src.config.settings import settings
from src.dp.value_iteration import SWEEPS, MDPSpec
from src.models.estimation import CONDITION_MESSAGE, EstimationConfig
from src.pruning.prune_tree import FRONTIERS
from src.truth.study import StudyConfig, TruthKind

logger = logging.getLogger(__name__)

_ENV_PATTERN = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)(?::([^}]*))?\}")


class FitSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_depth: Optional[int] = Field(default=None, ge=1)
    frontier: str = "exact"
    order: str = "deepest"

    @field_validator("frontier")
    @classmethod
    def _known_frontier(cls, value: str) -> str:
        if value not in FRONTIERS:
            raise ValueError(f"frontier must be one of {FRONTIERS}")
        return value

    @field_validator("order")
    @classmethod
    def _known_order(cls, value: str) -> str:
        if value not in ("deepest", "random"):
            raise ValueError("order must be 'deepest' or 'random'")
        return value


class StudySection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    truth: TruthKind = TruthKind.ORDER3
    n: int = Field(default=1000, gt=0)
    groups: int = Field(default=1, ge=1)
    replications: int = Field(default=100, ge=1)
    tracked: Optional[List[str]] = None
    max_depth: Optional[int] = Field(default=None, ge=1)
    check_theorems: bool = True
    oracle_depth: int = Field(default=3, ge=0)


class DPSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    actions: List[str] = Field(min_length=1)
    rewards: List[List[float]]
    discount: float = Field(ge=0.0, lt=1.0)
    sweep: str = "jacobi"
    approximate: bool = False
    tol: Optional[float] = Field(default=None, gt=0.0)
    max_iter: Optional[int] = Field(default=None, ge=1)

    @field_validator("sweep")
    @classmethod
    def _known_sweep(cls, value: str) -> str:
        if value not in SWEEPS:
            raise ValueError(f"sweep must be one of {SWEEPS}")
        return value

    def spec(self) -> MDPSpec:
        return MDPSpec(actions=self.actions, rewards=self.rewards, discount=self.discount)


class AvemSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    option: str
    x: str
    y: str


class RunConfig(BaseModel):
    """Everything a CLI run needs besides its input files."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    estimation: EstimationConfig = Field(default_factory=EstimationConfig)
    fit: FitSection = Field(default_factory=FitSection)
    study: StudySection = Field(default_factory=StudySection)
    dp: Optional[DPSection] = None
    avem: Optional[AvemSection] = None
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default_factory=lambda: settings.default_threads, ge=1)

    def study_config(self) -> StudyConfig:
        section = self.study
        return StudyConfig(
            truth=section.truth,
            n=section.n,
            groups=section.groups,
            replications=section.replications,
            seed=self.seed,
            estimation=self.estimation,
            tracked=section.tracked,
            max_depth=section.max_depth,
            threads=self.threads,
            check_theorems=section.check_theorems,
            oracle_depth=section.oracle_depth,
        )


def substitute_env_vars(obj: Any) -> Any:
    """Recursively replace ``${VAR}`` and ``${VAR:default}`` in strings."""
    if isinstance(obj, dict):
        return {key: substitute_env_vars(value) for key, value in obj.items()}
    if isinstance(obj, list):
        return [substitute_env_vars(item) for item in obj]
    if isinstance(obj, str):
        return _substitute_single(obj)
    return obj


def _substitute_single(value: str) -> str:
    def replace(match: re.Match) -> str:
        name, default = match.group(1), match.group(2)
        env_value = os.getenv(name)
        if env_value is not None:
            return env_value
        if default is not None:
            return default
        raise config_error(
            f"Environment variable '{name}' is not set",
            ErrorCode.CONFIG_INVALID,
            variable=name
        )

    return _ENV_PATTERN.sub(replace, value)


def _nest_flat_keys(raw: Dict[str, Any]) -> Dict[str, Any]:
    estimation_keys = set(EstimationConfig.model_fields)
    nested = dict(raw)
    flat = {key: nested.pop(key) for key in list(nested) if key in estimation_keys}
    if flat:
        nested["estimation"] = {**flat, **(nested.get("estimation") or {})}
    if "max_depth" in nested:
        nested["fit"] = {"max_depth": nested.pop("max_depth"), **(nested.get("fit") or {})}
    return nested


def run_config_from_dict(raw: Optional[Dict[str, Any]]) -> RunConfig:
    raw = substitute_env_vars(raw or {})
    if not isinstance(raw, dict):
        raise config_error("Run configuration must be a mapping", ErrorCode.CONFIG_INVALID)
    try:
        return RunConfig(**_nest_flat_keys(raw))
    except ValidationError as e:
        errors = [{"loc": ".".join(str(p) for p in err["loc"]), "msg": err["msg"]} for err in e.errors()]
        if any(CONDITION_MESSAGE in err["msg"] for err in errors):
            raise config_error(
                "Estimation exponents (k, r, m) are not an admissible combination",
                ErrorCode.CONDITION_VIOLATED,
                errors=errors
            ) from e
        raise config_error("Invalid run configuration", ErrorCode.CONFIG_INVALID, errors=errors) from e


def load_run_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    Load and validate a run configuration; no path gives the defaults.

    Raises:
        ConfigurationError: missing file, YAML syntax error or invalid values
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise config_error(
            f"Configuration file not found: {path}",
            ErrorCode.CONFIG_NOT_FOUND,
            path=str(path)
        )
    try:
        with open(path, "r", encoding="utf-8") as file:
            raw = yaml.safe_load(file)
    except yaml.YAMLError as e:
        raise config_error(f"YAML parsing error in {path}: {e}", ErrorCode.CONFIG_INVALID, path=str(path)) from e
    config = run_config_from_dict(raw)
    logger.info("Run configuration loaded", extra={"path": str(path)})
    return config
