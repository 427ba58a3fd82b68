"""
Pydantic models for estimation settings
The admissible (k, r, m) exponent combinations are validated at construction
"""
import math
from typing import Any, Dict, Union

from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from src.config.settings import settings
from src.core.distances import SetFamily, format_exponent, parse_exponent
from src.confidence.radii import RadiusConfig, RadiusMode

CONDITION_MESSAGE = "exponents violate the estimator condition"


def condition_holds(k: float, r: float, m: float) -> bool:
    """k <= m and r >= k m / (m - k), or k <= r = m = inf."""
    if k > m:
        return False
    if math.isinf(m):
        return r >= k
    if m == k:
        return math.isinf(r)
    return r >= k * m / (m - k)


class EstimationConfig(BaseModel):
    """Knobs of the pruning estimator"""
    model_config = ConfigDict(frozen=True)

    fam: SetFamily = SetFamily.SINGLETONS
    k: float = Field(default=1.0, ge=1.0, description="Exponent of the group norm on distances")
    r: float = Field(default=2.0, ge=1.0, description="Exponent of the group norm on radii")
    m: float = Field(default=2.0, ge=1.0, description="Exponent of the regularization event")
    c: float = Field(default_factory=lambda: settings.default_slack, gt=0.0, description="Slack multiplying the radii")
    delta: float = Field(default_factory=lambda: settings.default_delta, gt=0.0, lt=1.0)
    radius_mode: RadiusMode = Field(default_factory=lambda: RadiusMode(settings.default_radius_mode))
    gamma: float = Field(default_factory=lambda: settings.default_gamma, gt=1.0)
    restricted_candidates: bool = False

    @field_validator("k", "r", "m", mode="before")
    @classmethod
    def _parse_exponent(cls, value: Union[str, float, int]) -> float:
        return parse_exponent(value)

    @model_validator(mode="after")
    def _check_condition(self) -> "EstimationConfig":
        if not condition_holds(self.k, self.r, self.m):
            raise ValueError(
                f"{CONDITION_MESSAGE}: k={self.k}, r={self.r}, m={self.m}"
            )
        return self

    @field_serializer("k", "r", "m")
    def _serialize_exponent(self, value: float) -> Union[str, float]:
        return format_exponent(value)

    def radius_config(self) -> RadiusConfig:
        return RadiusConfig(mode=self.radius_mode, delta=self.delta, gamma=self.gamma, fam=self.fam)

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

    @classmethod
    def for_dynamic_programming(cls, **overrides: Any) -> "EstimationConfig":
        """Half-L1 metric with k = r = m = inf."""
        base = dict(fam=SetFamily.ALL_SUBSETS, k=math.inf, r=math.inf, m=math.inf)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def for_discrete_choice(cls, **overrides: Any) -> "EstimationConfig":
        """Sup metric with k = 1, r = m = 2."""
        base = dict(fam=SetFamily.SINGLETONS, k=1.0, r=2.0, m=2.0)
        base.update(overrides)
        return cls(**base)
