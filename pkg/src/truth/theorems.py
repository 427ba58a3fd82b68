"""
Conditional guarantees checked on simulated replications.

Each check returns the list of violations it found. They are meaningful
only when c > 1 and the Good event holds; with c <= 1 every check returns an
empty list.
"""

import logging
from typing import Any, Dict, List

import numpy as np

from src.core.distances import distance_matrix, group_norm
from src.core.tree_shape import TreeShape, terminal_node
from src.pruning.context_model import ContextTreeModel
from src.truth.oracle import OracleEvaluator
from src.truth.true_models import FiniteTreeModel, TrueModel

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9

Violation = Dict[str, Any]


def check_no_overestimation(fitted: ContextTreeModel, truth: TrueModel) -> List[Violation]:
    """Every node of T_hat must belong to the compatible tree T*."""
    if fitted.config.c <= 1.0:
        return []
    return [
        {"check": "no_overestimation", "context": fitted.alphabet.format(w)}
        for w in fitted.shape.sorted_nodes()
        if not truth.contains(w)
    ]


def past_classes(*trees: TreeShape) -> List[tuple]:
    """Leaves of the completed union of the given trees; each fixes every terminal node."""
    size = trees[0].alphabet_size
    nodes = frozenset().union(*(tree.nodes for tree in trees))
    return TreeShape.closure(nodes, size).completed().leaves()


def check_radius_bound(
    fitted: ContextTreeModel, oracle_tree: TreeShape, evaluator: OracleEvaluator
) -> List[Violation]:
    """R_r{conf(T_hat(x))} <= max{R_r{conf(T(x))}, 2 c_{T(x)}/(c - 1) - R_r{conf(T(x))}}."""
    c = fitted.config.c
    if c <= 1.0:
        return []
    violations = []
    for past in past_classes(fitted.shape, oracle_tree):
        estimated = terminal_node(fitted.shape, past)
        reference = terminal_node(oracle_tree, past)
        lhs = fitted.radius_norm(estimated)
        radius = evaluator.radius_norm(reference)
        rhs = max(radius, 2.0 * evaluator.approx_error(reference) / (c - 1.0) - radius)
        if lhs > rhs + TOLERANCE:
            violations.append({
                "check": "radius_bound",
                "past": fitted.alphabet.format(past),
                "lhs": lhs,
                "rhs": rhs,
            })
    return violations


def check_oracle_inequality(
    fitted: ContextTreeModel, oracle_tree: TreeShape, evaluator: OracleEvaluator
) -> List[Violation]:
    """
    M_k{d(P_hat(.|x), p_bar(.|T(x)))} <= max{(1 + 2c) R_r{conf(T(x))}, (c+1)/(c-1) c_{T(x)}}.

    For finite truths the companion bound against p(.|x), with c_{T(x)}
    added to the right-hand side, is checked as well.
    """
    cfg = fitted.config
    c = cfg.c
    if c <= 1.0:
        return []
    truth = evaluator.sim.model
    trees = [fitted.shape, oracle_tree]
    finite = isinstance(truth, FiniteTreeModel)
    if finite:
        trees.append(truth.shape)

    violations = []
    for past in past_classes(*trees):
        estimated = fitted.distributions[terminal_node(fitted.shape, past)]
        reference = terminal_node(oracle_tree, past)
        bias = evaluator.approx_error(reference)
        rhs = max((1.0 + 2.0 * c) * evaluator.radius_norm(reference), (c + 1.0) / (c - 1.0) * bias)

        oracle = evaluator.oracle_probs(reference)
        lhs = group_norm(distance_matrix(estimated[None], oracle[None], cfg.fam)[0, 0], cfg.k)
        if lhs > rhs + TOLERANCE:
            violations.append({
                "check": "oracle_inequality",
                "past": fitted.alphabet.format(past),
                "lhs": lhs,
                "rhs": rhs,
            })

        if finite:
            true_laws = np.stack([truth.true_prob(past, g) for g in range(fitted.group_count)])
            lhs_true = group_norm(distance_matrix(estimated[None], true_laws[None], cfg.fam)[0, 0], cfg.k)
            if lhs_true > bias + rhs + TOLERANCE:
                violations.append({
                    "check": "oracle_inequality_true",
                    "past": fitted.alphabet.format(past),
                    "lhs": lhs_true,
                    "rhs": bias + rhs,
                })
    return violations
