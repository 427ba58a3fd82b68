"""
Radius tables and monotonization along suffix extension.
"""

import logging
from typing import Dict, Iterator, Mapping, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from src.core.alphabet import Context
from src.core.distances import group_norm
from src.counting.count_trie import CountTrie, TrieNode
from src.confidence.radii import RadiusCalculator, RadiusConfig, calculator_for

logger = logging.getLogger(__name__)


class RadiusTable:
    """Mapping context -> per-group radii in (0, 1]; unknown contexts carry radius 1."""

    def __init__(self, radii: Mapping[Context, NDArray[np.float64]], group_count: int, l2_fallback: bool = False):
        self._radii: Dict[Context, NDArray[np.float64]] = {}
        for w, values in radii.items():
            arr = np.array(values, dtype=np.float64)
            arr.setflags(write=False)
            self._radii[tuple(w)] = arr
        self.group_count = group_count
        self.l2_fallback = l2_fallback
        self._norms: Dict[Tuple[Context, float], float] = {}

    def __contains__(self, w: object) -> bool:
        return w in self._radii

    def __len__(self) -> int:
        return len(self._radii)

    def __iter__(self) -> Iterator[Context]:
        return iter(self._radii)

    def items(self):
        return self._radii.items()

    def get(self, w: Context) -> NDArray[np.float64]:
        values = self._radii.get(tuple(w))
        if values is None:
            return np.ones(self.group_count)
        return values

    def norm(self, w: Context, r: float) -> float:
        """R_r{conf(w)}, cached."""
        key = (tuple(w), float(r))
        if key not in self._norms:
            self._norms[key] = group_norm(self.get(w), r)
        return self._norms[key]

    def restricted(self, contexts) -> "RadiusTable":
        return RadiusTable({w: self.get(w) for w in contexts}, self.group_count, self.l2_fallback)


def monotonize(table: RadiusTable) -> RadiusTable:
    """conf*(w) = max over suffixes w' of w of conf(w'), per group."""
    out: Dict[Context, NDArray[np.float64]] = {}
    for w in sorted(table, key=len):
        values = table.get(w)
        if len(w) > 0 and w[1:] in out:
            values = np.maximum(values, out[w[1:]])
        out[w] = values
    return RadiusTable(out, table.group_count, table.l2_fallback)


class IncrementalRadii:
    """
    Monotonized radii computed node by node while a trie is being built.

    Nodes must be presented parents first (the trie builder's breadth-first
    order guarantees this).
    """

    def __init__(self, calculator: RadiusCalculator):
        self.calculator = calculator
        self.values: Dict[Context, NDArray[np.float64]] = {}

    def radii_for(self, node: TrieNode) -> NDArray[np.float64]:
        w = node.context
        cached = self.values.get(w)
        if cached is not None:
            return cached
        values = self.calculator.node_radii(node)
        if len(w) > 0:
            parent_values = self.values.get(w[1:])
            if parent_values is not None:
                values = np.maximum(values, parent_values)
        self.values[w] = values
        return values

    def table(self) -> RadiusTable:
        return RadiusTable(self.values, self.calculator.group_count, self.calculator.l2_fallback)


def build_radius_table(trie: CountTrie, cfg: RadiusConfig, calculator: Optional[RadiusCalculator] = None) -> RadiusTable:
    """Radius vectors for every trie node, monotonized along suffix extension."""
    calc = calculator or calculator_for(trie, cfg)
    incremental = IncrementalRadii(calc)
    for node in trie:
        incremental.radii_for(node)
    table = incremental.table()
    logger.debug(
        "Radius table built",
        extra={"nodes": len(table), "mode": cfg.mode.value, "l2_fallback": calc.l2_fallback}
    )
    return table
