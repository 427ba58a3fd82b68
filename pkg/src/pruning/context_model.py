"""
The fitted artifact: a pruned group context tree with per-node, per-group
distributions, counts and radii.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from src.config.exceptions import ErrorCode, estimation_error
from src.core.alphabet import Alphabet, Context
from src.core.tree_shape import TreeShape, terminal_node
from src.confidence.radius_table import RadiusTable
from src.models.estimation import EstimationConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContextTreeModel:
    alphabet: Alphabet
    shape: TreeShape
    distributions: Dict[Context, NDArray[np.float64]]
    counts_ctx: Dict[Context, NDArray[np.int64]]
    next_counts: Dict[Context, NDArray[np.int64]]
    radii: RadiusTable
    config: EstimationConfig
    lengths: Tuple[int, ...]
    completed: bool = False
    synthetic: FrozenSet[Context] = field(default_factory=frozenset)

    @property
    def group_count(self) -> int:
        return len(self.lengths)

    @property
    def n(self) -> int:
        return max(self.lengths)

    @property
    def height(self) -> int:
        return self.shape.height

    def terminal(self, past: Sequence[int]) -> Context:
        return terminal_node(self.shape, past)

    def distribution(self, w: Context, group: int) -> NDArray[np.float64]:
        self._check_group(group)
        return self.distributions[tuple(w)][group]

    def radius_norm(self, w: Context, r: Optional[float] = None) -> float:
        return self.radii.norm(w, self.config.r if r is None else r)

    def _check_group(self, group: int) -> None:
        if not 0 <= group < self.group_count:
            raise estimation_error(
                f"Group index {group} out of range",
                ErrorCode.GROUP_OUT_OF_RANGE,
                group=group,
                group_count=self.group_count
            )


def complete_model(model: ContextTreeModel) -> ContextTreeModel:
    """Add the missing children of every internal node; they copy their parent's data."""
    missing = model.shape.missing_children()
    if not missing:
        return replace(model, completed=True)
    distributions = dict(model.distributions)
    counts_ctx = dict(model.counts_ctx)
    next_counts = dict(model.next_counts)
    radii = {w: model.radii.get(w) for w in model.shape.nodes}
    for w in missing:
        source = w[1:]
        distributions[w] = distributions[source]
        counts_ctx[w] = counts_ctx[source]
        next_counts[w] = next_counts[source]
        radii[w] = radii[source]
    logger.debug("Model completed", extra={"synthetic_leaves": len(missing)})
    return replace(
        model,
        shape=TreeShape(model.shape.nodes | frozenset(missing), model.shape.alphabet_size),
        distributions=distributions,
        counts_ctx=counts_ctx,
        next_counts=next_counts,
        radii=RadiusTable(radii, model.radii.group_count, model.radii.l2_fallback),
        completed=True,
        synthetic=model.synthetic | frozenset(missing),
    )


def predict(model: ContextTreeModel, past: Sequence[int], group: int) -> NDArray[np.float64]:
    """P_hat(.|x) = p_hat(.|T_hat(x)) for one group."""
    model._check_group(group)
    return model.distributions[terminal_node(model.shape, past)][group]
