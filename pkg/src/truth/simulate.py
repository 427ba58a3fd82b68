"""
Stationary simulation from a true model.

Every simulated group keeps the conditional law that generated each of its
symbols, so oracle quantities can be evaluated exactly at every in-sample
position.
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from numpy.typing import NDArray

from src.config.exceptions import ErrorCode, simulation_error
from src.core.embedding import all_windows, window_count
from src.counting.count_trie import GroupSample
from src.truth.true_models import FiniteTreeModel, RenewalModel, TrueModel, stationary_law

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.Generator, None]


@dataclass(frozen=True)
class SimulatedSample:
    """A group sample with the generating model and per-position conditionals."""

    sample: GroupSample
    model: TrueModel
    # conditionals[g][i] = law of X_i given the full past (including the warm-up state)
    conditionals: Tuple[NDArray[np.float64], ...]
    # pre-sample window of each group (finite models only; empty for renewal)
    warmup: Tuple[NDArray[np.int64], ...] = ()

    @property
    def group_count(self) -> int:
        return self.sample.group_count

    @property
    def n(self) -> int:
        return self.sample.n

    @property
    def alphabet(self):
        return self.sample.alphabet

    @property
    def sequences(self):
        return self.sample.sequences


def _as_rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _simulate_finite(
    model: FiniteTreeModel, n: int, group_count: int, rng: np.random.Generator
):
    order = model.order
    size = model.alphabet.size
    count = window_count(order, size)

    groups = list(range(group_count))
    law_index = groups if model.law_rows > 1 else [0] * group_count
    distinct = sorted(set(law_index))
    laws = {g: model.symbol_laws(g) for g in distinct}
    law_table = np.stack([laws[law_index[g]] for g in groups])
    cumulative = np.cumsum(law_table, axis=2)
    starts = {g: stationary_law(model, g) for g in distinct}

    state = np.array([rng.choice(count, p=starts[law_index[g]]) for g in groups], dtype=np.int64)
    start = state.copy()
    windows = all_windows(order, size)
    symbols = np.empty((group_count, n), dtype=np.int64)
    conditionals = np.empty((group_count, n, size))
    rows = np.arange(group_count)
    for i in range(n):
        u = rng.random(group_count)
        nxt = np.minimum((cumulative[rows, state] < u[:, None]).sum(axis=1), size - 1)
        conditionals[:, i, :] = law_table[rows, state]
        symbols[:, i] = nxt
        state = (state * size + nxt) % count

    logger.debug("Finite model simulated", extra={"n": n, "groups": group_count, "order": order})
    return tuple(symbols), tuple(conditionals), tuple(windows[start])


def _simulate_renewal_group(model: RenewalModel, n: int, rng: np.random.Generator):
    interval, age = model.sample_start(rng)
    first = interval - 1 - age
    symbols = np.zeros(n, dtype=np.int64)
    if first < n:
        gaps = model.sample_gaps(n, rng)
        ones = first + np.concatenate(([0], np.cumsum(gaps)))
        ones = ones[ones < n]
        symbols[ones] = 1
    # zeros since the last 1 before each position
    index = np.arange(n, dtype=np.int64)
    last_one = np.where(symbols == 1, index, -1 - age)
    last_one = np.maximum.accumulate(np.concatenate(([-1 - age], last_one[:-1])))
    zeros = index - last_one - 1
    h = np.asarray(model.hazard(zeros), dtype=np.float64)
    return symbols, np.column_stack([1.0 - h, h])


def simulate(model: TrueModel, n: int, group_count: int = 1, seed: Seed = None) -> SimulatedSample:
    """
    Draw ``group_count`` independent stationary sequences of length n.

    Args:
        model: the true model
        n: sequence length
        group_count: number of groups (must match population models)
        seed: integer seed or a numpy Generator

    Returns:
        SimulatedSample
    """
    if n < 1:
        raise simulation_error("Sample size must be positive", ErrorCode.TRUE_MODEL_INVALID, n=n)
    if group_count < 1:
        raise simulation_error("Group count must be positive", ErrorCode.TRUE_MODEL_INVALID, groups=group_count)
    model.check_groups(group_count)
    rng = _as_rng(seed)

    if isinstance(model, FiniteTreeModel):
        sequences, conditionals, warmup = _simulate_finite(model, n, group_count, rng)
    elif isinstance(model, RenewalModel):
        drawn = [_simulate_renewal_group(model, n, rng) for _ in range(group_count)]
        sequences = tuple(s for s, _ in drawn)
        conditionals = tuple(c for _, c in drawn)
        warmup = tuple(np.empty(0, dtype=np.int64) for _ in drawn)
    else:
        raise simulation_error(
            f"No simulator for {type(model).__name__}",
            ErrorCode.TRUE_MODEL_INVALID
        )

    return SimulatedSample(
        sample=GroupSample(model.alphabet, sequences),
        model=model,
        conditionals=conditionals,
        warmup=warmup
    )
