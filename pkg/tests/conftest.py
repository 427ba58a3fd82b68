"""
Shared fixtures for the GroupTree test suite.
"""
from typing import Dict, Optional, Sequence

import numpy as np
import pytest

from src.confidence.radius_table import RadiusTable
from src.core.alphabet import Alphabet, Context
from src.core.tree_shape import TreeShape
from src.counting.count_trie import GroupSample
from src.models.estimation import EstimationConfig
from src.pruning.context_model import ContextTreeModel


def make_sample(*texts: str, alphabet: Optional[Alphabet] = None) -> GroupSample:
    """Sample from whitespace-separated symbol strings, one per group."""
    alphabet = alphabet or Alphabet.binary()
    return GroupSample.from_tokens(alphabet, [text.split() for text in texts])


def make_model(
    nodes: Sequence[Context],
    laws: Dict[Context, Sequence[Sequence[float]]],
    alphabet: Optional[Alphabet] = None,
    n: int = 1000,
    radius: float = 0.1,
    config: Optional[EstimationConfig] = None,
) -> ContextTreeModel:
    """
    Hand-built model on the given nodes.

    ``laws`` maps contexts to (L, |A|) rows; nodes without an entry get the
    uniform law.
    """
    alphabet = alphabet or Alphabet.binary()
    shape = TreeShape(frozenset(tuple(w) for w in nodes), alphabet.size)
    group_count = len(next(iter(laws.values())))
    uniform = np.full((group_count, alphabet.size), 1.0 / alphabet.size)
    distributions = {
        w: np.asarray(laws[w], dtype=np.float64) if w in laws else uniform
        for w in shape.nodes
    }
    counts = {w: np.full(group_count, n - 1, dtype=np.int64) for w in shape.nodes}
    next_counts = {w: np.zeros((group_count, alphabet.size), dtype=np.int64) for w in shape.nodes}
    radii = RadiusTable({w: np.full(group_count, radius) for w in shape.nodes}, group_count)
    return ContextTreeModel(
        alphabet=alphabet,
        shape=shape,
        distributions=distributions,
        counts_ctx=counts,
        next_counts=next_counts,
        radii=radii,
        config=config or EstimationConfig(),
        lengths=tuple([n] * group_count),
    )


@pytest.fixture
def binary():
    return Alphabet.binary()


@pytest.fixture
def periodic_sample():
    """L=1, "0 1 0 1 ..." of length 1000."""
    return GroupSample(Alphabet.binary(), (np.tile([0, 1], 500),))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_sample(rng):
    """Two binary groups of i.i.d. fair bits with unequal lengths."""
    return GroupSample(
        Alphabet.binary(),
        (rng.integers(0, 2, size=300), rng.integers(0, 2, size=250)),
    )


@pytest.fixture
def periodic_corpus(tmp_path):
    path = tmp_path / "periodic.txt"
    path.write_text("# periodic\nalphabet: 0 1\n" + " ".join(["0", "1"] * 500) + "\n", encoding="utf-8")
    return path
