"""
Value iteration on a fitted group context tree.

Groups are identified with actions: group u of the model supplies the
transition law P_hat_u(.|x) used when action u is taken. The state space is
the order-h window embedding A^h of the tree (h = height), which makes the
transitions x -> xa exact for every tree-compatible chain.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.config.exceptions import ErrorCode, solver_error
from src.config.settings import settings
from src.core.alphabet import Alphabet, Context
from src.core.distances import SetFamily
from src.core.embedding import all_windows, shift_table, window_count, window_index
from src.core.tree_shape import terminal_node
from src.pruning.context_model import ContextTreeModel, complete_model
from src.truth.true_models import FiniteTreeModel

logger = logging.getLogger(__name__)

SWEEPS = ("jacobi", "gauss_seidel")


class MDPSpec(BaseModel):
    """Actions, rewards f(a, u) indexed [symbol][action] and discount beta."""
    model_config = ConfigDict(frozen=True)

    actions: List[str] = Field(min_length=1)
    rewards: List[List[float]]
    discount: float = Field(ge=0.0, lt=1.0)

    @field_validator("rewards")
    @classmethod
    def _finite(cls, value: List[List[float]]) -> List[List[float]]:
        if not value or any(not math.isfinite(x) for row in value for x in row):
            raise ValueError("rewards must be a nonempty table of finite numbers")
        return value

    def reward_matrix(self, alphabet_size: int) -> NDArray[np.float64]:
        matrix = np.asarray(self.rewards, dtype=np.float64)
        if matrix.shape != (alphabet_size, len(self.actions)):
            raise solver_error(
                "Reward table must have one row per symbol and one column per action",
                ErrorCode.DP_SPEC_INVALID,
                expected=[alphabet_size, len(self.actions)],
                got=list(matrix.shape)
            )
        return matrix


@dataclass
class ValueTable:
    """Converged values over the states of the embedding."""

    alphabet: Alphabet
    order: int
    states: List[Context]
    values: NDArray[np.float64]
    policy: NDArray[np.int64]
    residual: float
    iterations: int
    contraction_ratios: List[float] = field(default_factory=list)
    approximate: bool = False
    _lookup: Optional[Callable[[Sequence[int]], int]] = field(default=None, repr=False)

    def state_of(self, past: Sequence[int]) -> int:
        if self._lookup is not None:
            return self._lookup(past)
        if len(past) < self.order:
            raise solver_error(
                "Past is shorter than the embedding order",
                ErrorCode.DP_SPEC_INVALID,
                order=self.order,
                past_length=len(past)
            )
        return window_index(past[len(past) - self.order:], self.alphabet.size)

    def value(self, past: Sequence[int]) -> float:
        return float(self.values[self.state_of(past)])

    def action(self, past: Sequence[int]) -> int:
        return int(self.policy[self.state_of(past)])

    def as_dict(self, actions: Sequence[str]) -> Dict[str, Dict[str, object]]:
        return {
            self.alphabet.format(state): {
                "value": float(self.values[i]),
                "action": actions[int(self.policy[i])],
            }
            for i, state in enumerate(self.states)
        }


# ============================================================================
# Bellman iteration on explicit laws
# ============================================================================

def solve_bellman(
    laws: NDArray[np.float64],
    next_state: NDArray[np.int64],
    rewards: NDArray[np.float64],
    discount: float,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    sweep: str = "jacobi"
):
    """
    Fixed point of V(s) = max_u {R[s, u] + beta sum_a laws[u, s, a] V(next_state[s, a])}.

    Args:
        laws: (U, S, A) transition laws per action
        next_state: (S, A) successor indices
        rewards: (S, U) immediate rewards
        discount: beta in [0, 1)
        tol: sup-norm residual to stop at
        max_iter: sweep limit
        sweep: "jacobi" (synchronous) or "gauss_seidel" (in place)

    Returns:
        (values, policy, residual, iterations, contraction_ratios)
    """
    if sweep not in SWEEPS:
        raise solver_error(f"Unknown sweep '{sweep}'", ErrorCode.DP_SPEC_INVALID, sweep=sweep)
    tol = settings.dp_tolerance if tol is None else tol
    max_iter = settings.dp_max_iter if max_iter is None else max_iter

    def q_values(v: NDArray[np.float64]) -> NDArray[np.float64]:
        return rewards + discount * np.einsum("usa,sa->su", laws, v[next_state])

    values = np.zeros(rewards.shape[0])
    ratios: List[float] = []
    previous_gap: Optional[float] = None
    residual = math.inf
    iterations = 0
    while iterations < max_iter:
        iterations += 1
        if sweep == "jacobi":
            updated = q_values(values).max(axis=1)
        else:
            updated = values.copy()
            for s in range(updated.size):
                expected = np.einsum("ua,a->u", laws[:, s, :], updated[next_state[s]])
                updated[s] = np.max(rewards[s] + discount * expected)
        residual = float(np.max(np.abs(updated - values)))
        if previous_gap is not None and previous_gap > 0.0:
            ratios.append(residual / previous_gap)
        previous_gap = residual
        values = updated
        if residual <= tol:
            break
    else:
        raise solver_error(
            "Value iteration did not converge",
            ErrorCode.DP_NOT_CONVERGED,
            residual=residual,
            iterations=iterations,
            tolerance=tol
        )
    policy = q_values(values).argmax(axis=1)
    return values, policy, residual, iterations, ratios


def iteration_bound(tol: float, discount: float, value_range: float) -> int:
    """Sweeps after which the Banach contraction guarantees residual <= tol."""
    if discount == 0.0 or value_range <= 0.0:
        return 1
    return max(1, int(math.ceil(math.log(tol * (1.0 - discount) / value_range) / math.log(discount))))


# ============================================================================
# Window embedding
# ============================================================================

def _check_actions(spec: MDPSpec, group_count: Optional[int]) -> None:
    if group_count is not None and group_count != len(spec.actions):
        raise solver_error(
            "Each action needs one group of the model",
            ErrorCode.DP_SPEC_INVALID,
            actions=len(spec.actions),
            groups=group_count
        )


def _warn_on_metric(model: ContextTreeModel) -> None:
    cfg = model.config
    if cfg.fam is not SetFamily.ALL_SUBSETS or not all(math.isinf(e) for e in (cfg.k, cfg.r, cfg.m)):
        logger.warning(
            "Value iteration is calibrated for the half-L1 metric with k=r=m=inf",
            extra={"fam": cfg.fam.value, "k": cfg.k, "r": cfg.r, "m": cfg.m}
        )


def _check_budget(order: int, alphabet_size: int) -> None:
    states = window_count(order, alphabet_size)
    if states > settings.dp_state_budget:
        raise solver_error(
            "Window embedding exceeds the state budget; use approximate=True "
            "to iterate over the tree nodes with longest-determined-suffix transitions",
            ErrorCode.DP_STATE_BUDGET_EXCEEDED,
            states=states,
            budget=settings.dp_state_budget,
            order=order
        )


def window_laws(law: Callable[[List[int], int], NDArray[np.float64]], order: int, alphabet_size: int, actions: int) -> NDArray[np.float64]:
    """laws[u, s] = law(window s, action u)."""
    windows = all_windows(order, alphabet_size).tolist()
    return np.stack([np.stack([law(window, u) for window in windows]) for u in range(actions)])


def _window_table(laws, spec: MDPSpec, alphabet: Alphabet, order: int, tol, max_iter, sweep) -> ValueTable:
    size = alphabet.size
    next_state = shift_table(order, size)
    windows = all_windows(order, size)
    rewards = spec.reward_matrix(size)[windows[:, -1]]
    values, policy, residual, iterations, ratios = solve_bellman(
        laws, next_state, rewards, spec.discount, tol, max_iter, sweep
    )
    return ValueTable(
        alphabet=alphabet,
        order=order,
        states=[tuple(w) for w in windows.tolist()],
        values=values,
        policy=policy,
        residual=residual,
        iterations=iterations,
        contraction_ratios=ratios,
    )


def _approximate_table(model: ContextTreeModel, spec: MDPSpec, tol, max_iter, sweep) -> ValueTable:
    """States are the non-root nodes of the completed tree."""
    model = complete_model(model)
    shape = model.shape
    states = [w for w in shape.sorted_nodes() if len(w) > 0]
    index = {w: i for i, w in enumerate(states)}
    size = model.alphabet.size

    def deepest(past: Sequence[int]) -> Context:
        node: Context = ()
        for depth in range(len(past)):
            child = (int(past[len(past) - 1 - depth]),) + node
            if child not in shape:
                break
            node = child
        return node

    next_state = np.array([[index[deepest(w + (a,))] for a in range(size)] for w in states], dtype=np.int64)
    laws = np.stack([
        np.stack([model.distributions[deepest(w)][u] for w in states])
        for u in range(len(spec.actions))
    ])
    rewards = spec.reward_matrix(size)[[w[-1] for w in states]]
    values, policy, residual, iterations, ratios = solve_bellman(
        laws, next_state, rewards, spec.discount, tol, max_iter, sweep
    )
    return ValueTable(
        alphabet=model.alphabet,
        order=shape.height,
        states=states,
        values=values,
        policy=policy,
        residual=residual,
        iterations=iterations,
        contraction_ratios=ratios,
        approximate=True,
        _lookup=lambda past: index[deepest(past)],
    )


def value_iteration(
    model: ContextTreeModel,
    spec: MDPSpec,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    sweep: str = "jacobi",
    approximate: bool = False
) -> ValueTable:
    """
    Estimated value function V_hat over the order-h embedding of the fitted tree.

    Args:
        model: fitted model with one group per action
        spec: actions, rewards and discount
        tol: sup-norm residual to stop at (default from settings)
        max_iter: sweep limit (default from settings)
        sweep: "jacobi" or "gauss_seidel"
        approximate: iterate over tree nodes instead of windows

    Returns:
        ValueTable
    """
    _warn_on_metric(model)
    _check_actions(spec, model.group_count)
    if approximate and model.height > 0:
        table = _approximate_table(model, spec, tol, max_iter, sweep)
    else:
        order = max(model.height, 1)
        _check_budget(order, model.alphabet.size)

        def law(window, u):
            return model.distributions[terminal_node(model.shape, window)][u]

        laws = window_laws(law, order, model.alphabet.size, len(spec.actions))
        table = _window_table(laws, spec, model.alphabet, order, tol, max_iter, sweep)
    logger.info(
        "Value iteration converged",
        extra={
            "states": len(table.states),
            "iterations": table.iterations,
            "residual": table.residual,
            "approximate": table.approximate,
        }
    )
    return table


def true_value_iteration(
    truth: FiniteTreeModel,
    spec: MDPSpec,
    order: Optional[int] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None
) -> ValueTable:
    """Exact value function V of a finite truth (one law per action, or shared)."""
    _check_actions(spec, truth.group_count)
    order = max(truth.height, 1) if order is None else order
    _check_budget(order, truth.alphabet.size)
    laws = window_laws(truth.true_prob, order, truth.alphabet.size, len(spec.actions))
    return _window_table(laws, spec, truth.alphabet, order, tol, max_iter, "jacobi")


# ============================================================================
# Error bound diagnostic
# ============================================================================

@dataclass
class ErrorBound:
    """Per-state |V_hat - V| against the perturbation bound."""

    states: List[Context]
    lhs: NDArray[np.float64]
    rhs: NDArray[np.float64]
    bound: float
    holds: bool
    pointwise: NDArray[np.bool_]


def _dual(q: float) -> float:
    if q == 1.0:
        return math.inf
    if math.isinf(q):
        return 1.0
    return q / (q - 1.0)


def error_bound_from_laws(
    true_laws: NDArray[np.float64],
    estimated_laws: NDArray[np.float64],
    true_values: NDArray[np.float64],
    estimated_values: NDArray[np.float64],
    next_state: NDArray[np.int64],
    discount: float,
    q: float = 1.0
):
    """
    (lhs, rhs, bound) with rhs(x) = beta/(1-beta) ||V(x.)||_{q*} max_u ||P_hat_u(.|x) - p_u(.|x)||_q.

    The checked inequality is max_x lhs(x) <= max_x rhs(x) = bound.
    """
    lhs = np.abs(estimated_values - true_values)
    successor_values = true_values[next_state]
    dual = _dual(q)
    value_norms = np.linalg.norm(successor_values, ord=dual, axis=1)
    law_gaps = np.linalg.norm(estimated_laws - true_laws, ord=q, axis=2).max(axis=0)
    rhs = discount / (1.0 - discount) * value_norms * law_gaps
    return lhs, rhs, float(rhs.max())


def dp_error_bound(
    truth: FiniteTreeModel,
    model: ContextTreeModel,
    spec: MDPSpec,
    q: float = 1.0,
    tol: Optional[float] = None
) -> ErrorBound:
    """Compare V_hat with the exact V on a common window embedding."""
    _check_actions(spec, model.group_count)
    order = max(truth.height, model.height, 1)
    exact = true_value_iteration(truth, spec, order=order, tol=tol)
    size = model.alphabet.size

    def law(window, u):
        return model.distributions[terminal_node(model.shape, window)][u]

    estimated_laws = window_laws(law, order, size, len(spec.actions))
    true_laws = window_laws(truth.true_prob, order, size, len(spec.actions))
    estimated = _window_table(estimated_laws, spec, model.alphabet, order, tol, None, "jacobi")
    lhs, rhs, bound = error_bound_from_laws(
        true_laws, estimated_laws, exact.values, estimated.values,
        shift_table(order, size), spec.discount, q
    )
    # solver residuals enter both value tables
    slack = 1e-9 + 2.0 * max(exact.residual, estimated.residual) / (1.0 - spec.discount)
    holds = float(lhs.max()) <= bound + slack
    if not holds:
        logger.warning("Value error exceeds the perturbation bound", extra={"lhs": float(lhs.max()), "bound": bound})
    return ErrorBound(
        states=exact.states,
        lhs=lhs,
        rhs=rhs,
        bound=bound,
        holds=holds,
        pointwise=lhs <= rhs + slack,
    )
