"""
Group norms and set-family metrics.

``group_norm`` is the power mean ||v||_{L,q} = ((1/L) sum |v_l|^q)^(1/q); it
serves both as M_k over per-group distances and R_r over per-group radii.
The set-family metric d_S(p, q) = sup_{S in S} |p(S) - q(S)| has closed forms
for the two supported families: the sup norm for singletons and half the L1
norm for all subsets.
"""

import itertools
import math
from enum import Enum
from typing import FrozenSet, Iterator, Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.config.exceptions import ErrorCode, data_error, estimation_error

DISTRIBUTION_TOLERANCE = 1e-12

Exponent = Union[int, float]


class SetFamily(str, Enum):
    SINGLETONS = "singletons"
    ALL_SUBSETS = "all_subsets"

    def cardinality(self, alphabet_size: int) -> int:
        if self is SetFamily.SINGLETONS:
            return alphabet_size
        return 2 ** alphabet_size

    def members(self, alphabet_size: int) -> Iterator[FrozenSet[int]]:
        """Enumerate the sets of the family explicitly."""
        if self is SetFamily.SINGLETONS:
            for a in range(alphabet_size):
                yield frozenset((a,))
            return
        for r in range(alphabet_size + 1):
            for combo in itertools.combinations(range(alphabet_size), r):
                yield frozenset(combo)


def make_distribution(probs: ArrayLike, size: Optional[int] = None) -> NDArray[np.float64]:
    """Validate and return a probability vector."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or (size is not None and p.shape[0] != size):
        raise data_error(
            "Distribution has the wrong shape",
            ErrorCode.ALPHABET_MISMATCH,
            shape=list(p.shape),
            expected=size
        )
    if np.any(p < 0) or abs(float(p.sum()) - 1.0) > DISTRIBUTION_TOLERANCE:
        raise data_error(
            "Distribution entries must be nonnegative and sum to one",
            ErrorCode.SAMPLE_INVALID,
            probs=p.tolist()
        )
    return p


def group_norm(v: ArrayLike, q: Exponent) -> float:
    """Power mean of |v| with exponent q in [1, inf]."""
    arr = np.abs(np.asarray(v, dtype=np.float64)).ravel()
    if arr.size == 0:
        raise estimation_error("group_norm of an empty vector", ErrorCode.NORM_INPUT_INVALID)
    if not q >= 1:
        raise estimation_error(
            f"Norm exponent must be in [1, inf], got {q}",
            ErrorCode.NORM_INPUT_INVALID,
            exponent=q
        )
    if math.isinf(q):
        return float(arr.max())
    if q == 1:
        return float(arr.mean())
    return float(np.mean(arr ** q) ** (1.0 / q))


def group_norm_rows(values: NDArray[np.float64], q: Exponent) -> NDArray[np.float64]:
    """``group_norm`` applied along the last axis."""
    arr = np.abs(values)
    if math.isinf(q):
        return arr.max(axis=-1)
    if q == 1:
        return arr.mean(axis=-1)
    return np.mean(arr ** q, axis=-1) ** (1.0 / q)


def metric_distance(p: ArrayLike, q: ArrayLike, fam: SetFamily) -> float:
    p_arr = np.asarray(p, dtype=np.float64)
    q_arr = np.asarray(q, dtype=np.float64)
    if p_arr.shape != q_arr.shape:
        raise data_error(
            "Distributions live on different alphabets",
            ErrorCode.ALPHABET_MISMATCH,
            left=list(p_arr.shape),
            right=list(q_arr.shape)
        )
    diff = np.abs(p_arr - q_arr)
    if fam is SetFamily.SINGLETONS:
        return float(diff.max())
    return float(0.5 * diff.sum())


def distance_matrix(left: NDArray[np.float64], right: NDArray[np.float64], fam: SetFamily) -> NDArray[np.float64]:
    """
    Pairwise per-group distances.

    Args:
        left: array of shape (m1, L, |A|)
        right: array of shape (m2, L, |A|)

    Returns:
        array of shape (m1, m2, L)
    """
    diff = np.abs(left[:, None, :, :] - right[None, :, :, :])
    if fam is SetFamily.SINGLETONS:
        return diff.max(axis=-1)
    return 0.5 * diff.sum(axis=-1)


def set_probabilities(p: ArrayLike, fam: SetFamily) -> NDArray[np.float64]:
    """p(S) for every member S of the family, in ``members`` order."""
    p_arr = np.asarray(p, dtype=np.float64)
    return np.array([p_arr[list(s)].sum() if s else 0.0 for s in fam.members(p_arr.shape[-1])])


def parse_exponent(value: Union[str, Exponent]) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "∞"):
            return math.inf
        return float(value)
    return float(value)


def format_exponent(value: float) -> Union[str, float]:
    return "inf" if math.isinf(value) else value


