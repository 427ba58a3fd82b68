"""
Marginal dynamic effects for discrete choice data.

Groups are agents. For an option a and two pasts x, y the per-agent effect
is m_l = p_hat_l(a | T_hat(x)) - p_hat_l(a | T_hat(y)); AVEm is their mean.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from src.config.exceptions import ErrorCode, solver_error
from src.core.alphabet import Alphabet, Context
from src.core.distances import SetFamily
from src.pruning.context_model import ContextTreeModel

logger = logging.getLogger(__name__)


class EffectQuery(BaseModel):
    """Option a and two pasts x, y given newest-last."""
    model_config = ConfigDict(frozen=True)

    option: int = Field(ge=0)
    x: List[int]
    y: List[int]

    @classmethod
    def from_tokens(cls, alphabet: Alphabet, option: str, x: str, y: str) -> "EffectQuery":
        return cls(
            option=alphabet.index(option),
            x=list(alphabet.parse_context(x)),
            y=list(alphabet.parse_context(y)),
        )

    def swapped(self) -> "EffectQuery":
        return EffectQuery(option=self.option, x=self.y, y=self.x)


@dataclass
class EffectReport:
    option: int
    effects: NDArray[np.float64]
    avem: float
    context_x: Context
    context_y: Context
    envelope_terms: Dict[str, float] = field(default_factory=dict)
    # nan when c <= 1
    envelope: float = math.nan

    def to_dict(self, alphabet: Alphabet) -> Dict[str, object]:
        return {
            "option": alphabet.symbols[self.option],
            "effects": self.effects.tolist(),
            "avem": self.avem,
            "context_x": alphabet.format(self.context_x),
            "context_y": alphabet.format(self.context_y),
            "envelope_terms": dict(self.envelope_terms),
            "envelope": None if math.isnan(self.envelope) else self.envelope,
        }


def _check_query(model: ContextTreeModel, query: EffectQuery) -> None:
    if query.option >= model.alphabet.size:
        raise solver_error(
            f"Option {query.option} is not a symbol of the alphabet",
            ErrorCode.EFFECT_QUERY_INVALID,
            option=query.option,
            alphabet_size=model.alphabet.size
        )


def _warn_on_metric(model: ContextTreeModel) -> None:
    cfg = model.config
    if cfg.fam is not SetFamily.SINGLETONS or cfg.k != 1.0 or cfg.r != 2.0 or cfg.m != 2.0:
        logger.warning(
            "Effects are calibrated for the sup metric with k=1, r=m=2",
            extra={"fam": cfg.fam.value, "k": cfg.k, "r": cfg.r, "m": cfg.m}
        )


def _terminals(model: ContextTreeModel, query: EffectQuery):
    # InsufficientHistoryError propagates when a window is too short
    return model.terminal(query.x), model.terminal(query.y)


def _effects(model: ContextTreeModel, context_x: Context, context_y: Context, option: int) -> NDArray[np.float64]:
    return model.distributions[context_x][:, option] - model.distributions[context_y][:, option]


def agent_effects(model: ContextTreeModel, query: EffectQuery) -> NDArray[np.float64]:
    _check_query(model, query)
    context_x, context_y = _terminals(model, query)
    return _effects(model, context_x, context_y, query.option)


def marginal_effect(model: ContextTreeModel, group: int, query: EffectQuery) -> float:
    """m_hat_l(a, x, y) for one agent."""
    model._check_group(group)
    return float(agent_effects(model, query)[group])


def envelope_terms(model: ContextTreeModel, context_x: Context, context_y: Context) -> Dict[str, float]:
    """Observable parts of the AVEm error bound; oracle bias terms are not included."""
    L = model.group_count
    size = model.alphabet.size
    n = model.n
    return {
        "radius_x": model.radius_norm(context_x, 2.0),
        "radius_y": model.radius_norm(context_y, 2.0),
        "sampling": math.sqrt(2.0 * math.log(size * n ** 4 / (4.0 * model.config.delta)) / L),
        "agents": 2.0 / L,
    }


def avem(model: ContextTreeModel, query: EffectQuery) -> EffectReport:
    """
    Average marginal dynamic effect over the agents of the model.

    Args:
        model: fitted model, one group per agent
        query: option and the two pasts

    Returns:
        EffectReport with per-agent effects, their mean and the diagnostic envelope
    """
    _warn_on_metric(model)
    _check_query(model, query)
    context_x, context_y = _terminals(model, query)
    effects = _effects(model, context_x, context_y, query.option)
    terms = envelope_terms(model, context_x, context_y)
    c = model.config.c
    envelope = 4.0 * c * c / (c - 1.0) * sum(terms.values()) if c > 1.0 else math.nan
    report = EffectReport(
        option=query.option,
        effects=effects,
        avem=float(np.mean(effects)),
        context_x=context_x,
        context_y=context_y,
        envelope_terms=terms,
        envelope=envelope,
    )
    logger.info(
        "AVEm computed",
        extra={
            "agents": model.group_count,
            "avem": report.avem,
            "context_x": model.alphabet.format(context_x),
            "context_y": model.alphabet.format(context_y),
        }
    )
    return report


def population_avem(laws_x: Sequence[float], laws_y: Sequence[float]) -> float:
    """Mean of p_l(a|x) - p_l(a|y) over agents with known laws."""
    return float(np.mean(np.asarray(laws_x, dtype=np.float64) - np.asarray(laws_y, dtype=np.float64)))
