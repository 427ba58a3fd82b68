"""
Visible-suffix trie E_n with per-group occurrence counts.

Counting convention: an occurrence of w "ends at i" when
X_{i-|w|+1}..X_i = w, so N_{k,l}(w) = #{i : |w| <= i <= k, occurrence ends at i}.
With this convention p_hat(a|w) = N_n(wa) / N_{n-1}(w) is a proper
conditional frequency and sum_a N_n(wa) = N_{n-1}(w) holds exactly.

Children of a node extend it by one OLDER symbol (aw), matching the suffix
order of context trees; the forward counts N_n(wa) needed for p_hat are
stored per node as ``next_counts``.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable, Deque, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from src.config.exceptions import ErrorCode, data_error, estimation_error
from src.config.settings import settings
from src.core.alphabet import Alphabet, Context

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroupSample:
    """L sequences over a shared alphabet, stored as integer index arrays."""

    alphabet: Alphabet
    sequences: Tuple[NDArray[np.int64], ...]

    def __post_init__(self):
        seqs = tuple(np.asarray(s, dtype=np.int64) for s in self.sequences)
        if not seqs:
            raise data_error("A sample needs at least one group", ErrorCode.SAMPLE_INVALID)
        for g, seq in enumerate(seqs):
            if seq.ndim != 1 or seq.size < 1:
                raise data_error(
                    "Each group needs a nonempty one-dimensional sequence",
                    ErrorCode.SAMPLE_INVALID,
                    group=g
                )
            if seq.min() < 0 or seq.max() >= self.alphabet.size:
                raise data_error(
                    "Sequence contains symbols outside the alphabet",
                    ErrorCode.SAMPLE_INVALID,
                    group=g
                )
        object.__setattr__(self, "sequences", seqs)

    @classmethod
    def from_tokens(cls, alphabet: Alphabet, groups: Sequence[Sequence[str]]) -> "GroupSample":
        return cls(alphabet, tuple(np.array(alphabet.encode(g), dtype=np.int64) for g in groups))

    @property
    def group_count(self) -> int:
        return len(self.sequences)

    @property
    def lengths(self) -> Tuple[int, ...]:
        return tuple(int(s.size) for s in self.sequences)

    @property
    def n(self) -> int:
        """Global sample size used in the radius formulas (max over groups)."""
        return max(self.lengths)


class TrieNode:
    """One visible context with its per-group counts."""

    __slots__ = (
        "context", "counts_full", "counts_ctx", "next_counts",
        "children", "positions", "value_sums", "expanded", "_probs",
    )

    def __init__(
        self,
        context: Context,
        counts_full: NDArray[np.int64],
        counts_ctx: NDArray[np.int64],
        next_counts: NDArray[np.int64],
        positions: Optional[List[NDArray[np.int64]]] = None,
        value_sums: Optional[NDArray[np.float64]] = None
    ):
        self.context = context
        self.counts_full = counts_full
        self.counts_ctx = counts_ctx
        self.next_counts = next_counts
        self.children: Dict[int, "TrieNode"] = {}
        self.positions = positions
        self.value_sums = value_sums
        self.expanded = True
        self._probs: Optional[NDArray[np.float64]] = None

    @property
    def depth(self) -> int:
        return len(self.context)

    @property
    def visible(self) -> bool:
        return bool(self.counts_ctx.min() > 0)

    def probabilities(self) -> NDArray[np.float64]:
        """p_hat(.|w) for every group, shape (L, |A|)."""
        if self._probs is None:
            alphabet_size = self.next_counts.shape[1]
            if not self.visible:
                probs = np.full(self.next_counts.shape, 1.0 / alphabet_size)
            else:
                probs = self.next_counts / self.counts_ctx[:, None]
            probs.setflags(write=False)
            self._probs = probs
        return self._probs

    def __repr__(self) -> str:
        return f"TrieNode(context={self.context}, counts_ctx={self.counts_ctx.tolist()})"


class CountTrie:
    """Suffix-closed trie of visible contexts; immutable after build."""

    def __init__(self, sample: GroupSample, root: TrieNode, nodes: Dict[Context, TrieNode], max_depth: Optional[int]):
        self.sample = sample
        self.alphabet = sample.alphabet
        self.root = root
        self.nodes = nodes
        self.max_depth = max_depth

    @property
    def group_count(self) -> int:
        return self.sample.group_count

    @property
    def n(self) -> int:
        return self.sample.n

    def __contains__(self, w: object) -> bool:
        return w in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[TrieNode]:
        """Breadth-first iteration; parents precede children."""
        queue: Deque[TrieNode] = deque([self.root])
        while queue:
            node = queue.popleft()
            yield node
            for a in sorted(node.children):
                queue.append(node.children[a])

    def get(self, w: Context) -> Optional[TrieNode]:
        return self.nodes.get(tuple(w))

    def contexts(self) -> List[Context]:
        return [node.context for node in self]

    def visible_nodes(self) -> List[TrieNode]:
        return [node for node in self if node.visible]

    def subtree(self, w: Context) -> Iterator[TrieNode]:
        start = self.nodes.get(tuple(w))
        if start is None:
            return
        stack = [start]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children.values())

    def is_truncated(self) -> bool:
        return any(not node.expanded for node in self.nodes.values())


def _make_node(
    context: Context,
    full_positions: List[NDArray[np.int64]],
    sample: GroupSample,
    keep_positions: bool,
    position_values: Optional[Sequence[NDArray[np.float64]]] = None
) -> TrieNode:
    alphabet_size = sample.alphabet.size
    counts_full = np.empty(sample.group_count, dtype=np.int64)
    counts_ctx = np.empty(sample.group_count, dtype=np.int64)
    next_counts = np.zeros((sample.group_count, alphabet_size), dtype=np.int64)
    ctx_positions = []
    for g, (seq, pos) in enumerate(zip(sample.sequences, full_positions)):
        ctx = pos[pos <= seq.size - 2]
        counts_full[g] = pos.size
        counts_ctx[g] = ctx.size
        if ctx.size:
            next_counts[g] = np.bincount(seq[ctx + 1], minlength=alphabet_size)
        ctx_positions.append(ctx)
    value_sums = None
    if position_values is not None:
        value_sums = np.stack([
            values[ctx + 1].sum(axis=0) for values, ctx in zip(position_values, ctx_positions)
        ])
    return TrieNode(
        context, counts_full, counts_ctx, next_counts,
        ctx_positions if keep_positions else None,
        value_sums
    )


def build_count_trie(
    sample: GroupSample,
    max_depth: Optional[int] = None,
    keep_positions: bool = False,
    expand: Optional[Callable[[TrieNode], bool]] = None,
    node_budget: Optional[int] = None,
    position_values: Optional[Sequence[NDArray[np.float64]]] = None
) -> CountTrie:
    """
    Build E_n: every context with min_l N_{n-1,l}(w) > 0 (and the root).

    Args:
        sample: the grouped sequences
        max_depth: optional cap on context length
        keep_positions: retain the 0-based ending indices of context
            occurrences (those followed by a symbol) for oracle computations
        expand: optional predicate; when it returns False for a node, the
            node's descendants are not materialized and ``expanded`` is False
        node_budget: node count that triggers a size warning
        position_values: optional per-group arrays of shape (n_l, k); every
            node then stores in ``value_sums`` the sum of the rows at the
            positions following its context occurrences

    Returns:
        CountTrie
    """
    if max_depth is not None and max_depth < 1:
        raise estimation_error(
            "max_depth must be a positive integer",
            ErrorCode.TRIE_DEPTH_INVALID,
            max_depth=max_depth
        )
    budget = node_budget if node_budget is not None else settings.trie_node_budget
    warned = False
    alphabet_size = sample.alphabet.size

    root_positions = [np.arange(seq.size, dtype=np.int64) for seq in sample.sequences]
    root = _make_node((), root_positions, sample, keep_positions, position_values)
    nodes: Dict[Context, TrieNode] = {(): root}

    queue: Deque[Tuple[TrieNode, List[NDArray[np.int64]]]] = deque()
    if root.visible:
        queue.append((root, root_positions))

    while queue:
        node, positions = queue.popleft()
        depth = node.depth
        if max_depth is not None and depth >= max_depth:
            continue
        if expand is not None and not expand(node):
            node.expanded = False
            continue

        # split every group's ending positions by the symbol preceding the occurrence
        split: List[List[NDArray[np.int64]]] = [[] for _ in range(alphabet_size)]
        for seq, pos in zip(sample.sequences, positions):
            valid = pos[pos >= depth]
            preceding = seq[valid - depth]
            for a in range(alphabet_size):
                split[a].append(valid[preceding == a])

        for a in range(alphabet_size):
            child_positions = split[a]
            if not all(
                np.any(pos <= seq.size - 2)
                for seq, pos in zip(sample.sequences, child_positions)
            ):
                continue
            child = _make_node((a,) + node.context, child_positions, sample, keep_positions, position_values)
            node.children[a] = child
            nodes[child.context] = child
            queue.append((child, child_positions))

        if not warned and len(nodes) > budget:
            warned = True
            logger.warning(
                "Count trie exceeds node budget",
                extra={"nodes": len(nodes), "budget": budget, "depth": depth + 1}
            )

    logger.debug(
        "Count trie built",
        extra={"nodes": len(nodes), "groups": sample.group_count, "lengths": list(sample.lengths)}
    )
    return CountTrie(sample, root, nodes, max_depth)


def empirical_prob(trie: CountTrie, w: Context, group: int) -> NDArray[np.float64]:
    """p_hat(.|w) for one group; uniform when w is not visible in every group."""
    if not 0 <= group < trie.group_count:
        raise estimation_error(
            f"Group index {group} out of range",
            ErrorCode.GROUP_OUT_OF_RANGE,
            group=group,
            group_count=trie.group_count
        )
    node = trie.get(w)
    if node is None:
        return np.full(trie.alphabet.size, 1.0 / trie.alphabet.size)
    return node.probabilities()[group]
