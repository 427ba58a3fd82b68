"""
Generative ground truths for simulation studies.

Two kinds of truth are supported:
    - FiniteTreeModel: a complete context tree with per-leaf distributions,
      shared by every group or given per group (population models)
    - RenewalModel: the binary chain of a renewal process whose conditional
      law depends on the number of zeros since the last 1 (infinite tree)
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Mapping, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from src.config.exceptions import ErrorCode, simulation_error
from src.config.settings import settings
from src.core.alphabet import Alphabet, Context
from src.core.distances import make_distribution
from src.core.embedding import all_windows, shift_table, window_count
from src.core.tree_shape import TreeShape, terminal_node

logger = logging.getLogger(__name__)

# normalizing constant of the renewal inter-arrival law
RENEWAL_CONSTANT = 1.0 / (2.0 * math.log(2.0) - 1.0)


class TrueModel(ABC):
    """A stationary process (or population of processes) with known conditionals."""

    alphabet: Alphabet

    @property
    @abstractmethod
    def group_count(self) -> Optional[int]:
        """Fixed number of groups, or None when groups are i.i.d. copies."""

    @abstractmethod
    def true_prob(self, past: Sequence[int], group: int = 0) -> NDArray[np.float64]:
        """p(.|x) for a past written oldest symbol first."""

    @abstractmethod
    def contains(self, w: Context) -> bool:
        """Membership of w in the compatible tree T*."""

    @abstractmethod
    def conditional_range(self, w: Context, group: int = 0) -> NDArray[np.float64]:
        """
        Conditional laws whose closure covers {p(.|z) : z extends w}; shape (K, |A|).

        Suprema of convex functions of p(.|z) over pasts z extending w are
        attained on these rows.
        """

    def check_groups(self, group_count: int) -> None:
        if self.group_count is not None and self.group_count != group_count:
            raise simulation_error(
                f"Model defines {self.group_count} groups, {group_count} requested",
                ErrorCode.TRUE_MODEL_INVALID,
                model_groups=self.group_count,
                requested=group_count
            )


# ============================================================================
# Finite context tree
# ============================================================================

@dataclass(frozen=True)
class FiniteTreeModel(TrueModel):
    """
    Complete tree T* with leaf laws of shape (G, |A|).

    G = 1 means every group follows the same law; otherwise G is the fixed
    number of groups.
    """

    alphabet: Alphabet
    shape: TreeShape
    leaf_laws: Mapping[Context, NDArray[np.float64]]

    def __post_init__(self):
        if not self.shape.is_complete():
            raise simulation_error("True tree must be complete", ErrorCode.TRUE_MODEL_INVALID)
        if self.shape.alphabet_size != self.alphabet.size:
            raise simulation_error("Tree and alphabet sizes differ", ErrorCode.TRUE_MODEL_INVALID)
        laws: Dict[Context, NDArray[np.float64]] = {}
        sizes = set()
        for leaf in self.shape.leaves():
            if leaf not in self.leaf_laws:
                raise simulation_error(
                    f"Missing law for leaf '{self.alphabet.format(leaf)}'",
                    ErrorCode.TRUE_MODEL_INVALID
                )
            raw = np.atleast_2d(np.asarray(self.leaf_laws[leaf], dtype=np.float64))
            rows = np.stack([make_distribution(row, self.alphabet.size) for row in raw])
            rows.setflags(write=False)
            laws[leaf] = rows
            sizes.add(rows.shape[0])
        if len(sizes) != 1:
            raise simulation_error(
                "Every leaf needs the same number of group laws",
                ErrorCode.TRUE_MODEL_INVALID,
                sizes=sorted(sizes)
            )
        object.__setattr__(self, "leaf_laws", laws)

    @property
    def law_rows(self) -> int:
        return next(iter(self.leaf_laws.values())).shape[0]

    @property
    def group_count(self) -> Optional[int]:
        rows = self.law_rows
        return None if rows == 1 else rows

    @property
    def height(self) -> int:
        return self.shape.height

    @property
    def order(self) -> int:
        """Embedding order used for the window chain."""
        return max(self.height, 1)

    def law(self, leaf: Context, group: int = 0) -> NDArray[np.float64]:
        rows = self.leaf_laws[tuple(leaf)]
        return rows[group if rows.shape[0] > 1 else 0]

    def true_prob(self, past: Sequence[int], group: int = 0) -> NDArray[np.float64]:
        return self.law(terminal_node(self.shape, past), group)

    def contains(self, w: Context) -> bool:
        return tuple(w) in self.shape

    def compatible_leaves(self, w: Context):
        """Leaves v with v a suffix of w or w a suffix of v."""
        w = tuple(w)
        out = []
        for leaf in self.shape.leaves():
            shorter, longer = (leaf, w) if len(leaf) <= len(w) else (w, leaf)
            if longer[len(longer) - len(shorter):] == shorter:
                out.append(leaf)
        return out

    def conditional_range(self, w: Context, group: int = 0) -> NDArray[np.float64]:
        return np.stack([self.law(v, group) for v in self.compatible_leaves(w)])

    def transition_matrix(self, group: int = 0) -> NDArray[np.float64]:
        """Window-chain transition matrix over A^order."""
        order = self.order
        size = self.alphabet.size
        count = window_count(order, size)
        nxt = shift_table(order, size)
        matrix = np.zeros((count, count))
        for index, window in enumerate(all_windows(order, size).tolist()):
            law = self.true_prob(window, group)
            for a in range(size):
                matrix[index, nxt[index, a]] += law[a]
        return matrix

    def symbol_laws(self, group: int = 0) -> NDArray[np.float64]:
        """law_table[s] = next-symbol law after window s."""
        windows = all_windows(self.order, self.alphabet.size).tolist()
        return np.stack([self.true_prob(window, group) for window in windows])


def stationary_law(model: FiniteTreeModel, group: int = 0) -> NDArray[np.float64]:
    """Stationary distribution of the window chain, solved as a linear system."""
    matrix = model.transition_matrix(group)
    count = matrix.shape[0]
    system = np.vstack([matrix.T - np.eye(count), np.ones((1, count))])
    rhs = np.zeros(count + 1)
    rhs[-1] = 1.0
    law, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    residual = float(np.max(np.abs(law @ matrix - law)))
    if residual > settings.stationary_tolerance * 1e3 or law.min() < -settings.stationary_tolerance:
        raise simulation_error(
            "Stationary law could not be solved; the window chain may be reducible",
            ErrorCode.STATIONARY_SOLVE_FAILED,
            residual=residual,
            minimum=float(law.min())
        )
    law = np.clip(law, 0.0, None)
    return law / law.sum()


def make_order3_chain() -> FiniteTreeModel:
    """
    Full binary chain of order 3.

    The root's children index the most recent symbol. The probability of a 0
    depends on the two older symbols: 3/4 when both are 0, 1/4 when both are
    1 and 1/2 otherwise.
    """
    alphabet = Alphabet.binary()
    shape = TreeShape.full(3, 2)
    laws = {}
    for leaf in shape.leaves():
        older = leaf[:2]
        if older == (0, 0):
            p0 = 0.75
        elif older == (1, 1):
            p0 = 0.25
        else:
            p0 = 0.5
        laws[leaf] = np.array([[p0, 1.0 - p0]])
    return FiniteTreeModel(alphabet, shape, laws)


def make_population_model(
    shape: TreeShape,
    leaf_laws_per_group: Mapping[Context, Sequence[Sequence[float]]],
    alphabet: Optional[Alphabet] = None
) -> FiniteTreeModel:
    """Heterogeneous groups sharing one tree: leaf -> (L, |A|) laws."""
    alphabet = alphabet or Alphabet(tuple(str(a) for a in range(shape.alphabet_size)))
    return FiniteTreeModel(alphabet, shape, {w: np.asarray(v, dtype=np.float64) for w, v in leaf_laws_per_group.items()})


def make_depth1_population(
    group_count: int,
    low: float = 0.3,
    high: float = 0.7,
    other: float = 0.2
) -> FiniteTreeModel:
    """Binary depth-1 population: p_l(1|"0") spreads linearly from low to high, p_l(1|"1") = other."""
    if group_count < 1:
        raise simulation_error("Population needs at least one group", ErrorCode.TRUE_MODEL_INVALID)
    if group_count == 1:
        ones_after_zero = np.array([low])
    else:
        ones_after_zero = low + (high - low) * np.arange(group_count) / (group_count - 1)
    after_zero = np.column_stack([1.0 - ones_after_zero, ones_after_zero])
    after_one = np.tile([1.0 - other, other], (group_count, 1))
    return make_population_model(TreeShape.full(1, 2), {(0,): after_zero, (1,): after_one}, Alphabet.binary())


# ============================================================================
# Renewal process
# ============================================================================

def renewal_pmf(k) -> NDArray[np.float64]:
    """P(t = k) = C / (k (4k^2 - 1)) for k >= 1."""
    k = np.asarray(k, dtype=np.float64)
    return RENEWAL_CONSTANT / (k * (4.0 * k * k - 1.0))


def _asymptotic_tail(k) -> NDArray[np.float64]:
    """P(t > K) for large K from the Euler-Maclaurin expansion of the series."""
    k = np.asarray(k, dtype=np.float64)
    return RENEWAL_CONSTANT * (1.0 / (8.0 * k ** 2) - 1.0 / (8.0 * k ** 3) + 5.0 / (64.0 * k ** 4))


class RenewalModel(TrueModel):
    """
    Binary chain whose 1's are renewal epochs with gaps P(t=k).

    p(1 | 1 0^j) = h(j) = P(t = j + 1) / P(t > j). The compatible tree is
    {0^j, 1 0^j : j >= 0}.
    """

    def __init__(self, tail_mass: Optional[float] = None):
        self.alphabet = Alphabet.binary()
        self.tail_mass = tail_mass if tail_mass is not None else settings.renewal_tail_mass
        # smallest K whose asymptotic tail is below the mass left out of the gap table
        self.table_size = int(math.ceil(math.sqrt(RENEWAL_CONSTANT / (8.0 * self.tail_mass)))) + 1

    @property
    def group_count(self) -> Optional[int]:
        return None

    @cached_property
    def _pmf(self) -> NDArray[np.float64]:
        return renewal_pmf(np.arange(1, self.table_size + 1))

    @cached_property
    def _survival(self) -> NDArray[np.float64]:
        """P(t > j) for j = 0..table_size, by stable backward summation."""
        tail = float(_asymptotic_tail(self.table_size))
        backward = np.cumsum(self._pmf[::-1])[::-1]
        return np.append(backward + tail, tail)

    @cached_property
    def _cdf(self) -> NDArray[np.float64]:
        return 1.0 - self._survival[1:]

    @cached_property
    def _hazards(self) -> NDArray[np.float64]:
        return self.hazard(np.arange(self.table_size))

    @cached_property
    def _hazard_suffix_max(self) -> NDArray[np.float64]:
        return np.maximum.accumulate(self._hazards[::-1])[::-1]

    def pmf(self, k) -> NDArray[np.float64]:
        return renewal_pmf(k)

    def survival(self, j):
        """P(t > j)."""
        j = np.asarray(j, dtype=np.int64)
        inside = np.minimum(j, self.table_size)
        values = np.where(j <= self.table_size, self._survival[inside], _asymptotic_tail(np.maximum(j, 1)))
        return values if values.ndim else float(values)

    def hazard(self, j):
        """h(j) = P(t = j + 1 | t > j)."""
        j = np.asarray(j, dtype=np.int64)
        values = renewal_pmf(j + 1) / np.asarray(self.survival(j), dtype=np.float64)
        return values if values.ndim else float(values)

    def mean_gap(self) -> float:
        """E[t] = C / 2, from k P(t=k) = (C/2)(1/(2k-1) - 1/(2k+1))."""
        return RENEWAL_CONSTANT / 2.0

    def zeros_since_last_one(self, past: Sequence[int]) -> Optional[int]:
        for j, symbol in enumerate(reversed(past)):
            if int(symbol) == 1:
                return j
        return None

    def true_prob(self, past: Sequence[int], group: int = 0, age: Optional[int] = None) -> NDArray[np.float64]:
        j = self.zeros_since_last_one(past)
        if j is None:
            if age is None:
                raise simulation_error(
                    "Renewal past needs a 1 or an explicit age",
                    ErrorCode.INSUFFICIENT_PAST,
                    past_length=len(past)
                )
            j = age + len(past)
        h = self.hazard(j)
        return np.array([1.0 - h, h])

    def contains(self, w: Context) -> bool:
        w = tuple(w)
        if not w:
            return True
        body = w[1:] if w[0] == 1 else w
        return all(symbol == 0 for symbol in body)

    def hazard_bounds(self, j: int):
        """(inf, sup) of h(j') over j' >= j; the infimum is the limit 0."""
        if j < self.table_size:
            upper = float(self._hazard_suffix_max[j])
        else:
            upper = float(self.hazard(j))
        return 0.0, upper

    def conditional_range(self, w: Context, group: int = 0) -> NDArray[np.float64]:
        j = self.zeros_since_last_one(w)
        if j is not None:
            h = self.hazard(j)
            return np.array([[1.0 - h, h]])
        lower, upper = self.hazard_bounds(len(w))
        return np.array([[1.0 - lower, lower], [1.0 - upper, upper]])

    def sample_gaps(self, count: int, rng: np.random.Generator) -> NDArray[np.int64]:
        """Inter-arrival times by inversion of the tabulated CDF."""
        u = rng.random(count)
        limit = self._cdf[-1]
        if np.any(u > limit):
            raise simulation_error(
                "Renewal gap draw fell in the truncated tail",
                ErrorCode.RENEWAL_TRUNCATION,
                table_size=self.table_size,
                tail_mass=float(1.0 - limit),
                draw=float(u.max())
            )
        return np.searchsorted(self._cdf, u, side="left").astype(np.int64) + 1

    def sample_start(self, rng: np.random.Generator):
        """
        Stationary state before the first symbol.

        The interval straddling the origin is length biased with
        P(T >= K) = 1/(2K - 1); the age inside it is uniform.

        Returns:
            (interval length, zeros since the last 1)
        """
        u = 1.0 - rng.random()
        interval = int(math.floor((1.0 / u + 1.0) / 2.0))
        age = int(rng.integers(interval))
        return interval, age


def make_renewal() -> RenewalModel:
    return RenewalModel()


def true_prob(model: TrueModel, past: Sequence[int], group: int = 0) -> NDArray[np.float64]:
    return model.true_prob(past, group)


def true_tree_contains(model: TrueModel, w: Context) -> bool:
    return model.contains(w)
