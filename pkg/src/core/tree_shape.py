"""
Suffix-closed context trees and terminal-node lookup.
"""

import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Iterator, List, Sequence, Tuple

from src.config.exceptions import ErrorCode, InsufficientHistoryError, estimation_error
from src.core.alphabet import Context


def _sort_key(w: Context) -> Tuple[int, Context]:
    return (len(w), w)


@dataclass(frozen=True)
class TreeShape:
    """A finite suffix-closed set of contexts containing the root ``()``."""

    nodes: FrozenSet[Context]
    alphabet_size: int
    _children: Dict[Context, Tuple[Context, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = frozenset(tuple(w) for w in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if () not in nodes:
            raise estimation_error("A tree must contain the root", ErrorCode.TREE_INVALID)
        children: Dict[Context, List[Context]] = {w: [] for w in nodes}
        for w in nodes:
            if any(not 0 <= a < self.alphabet_size for a in w):
                raise estimation_error(
                    "Context symbol outside the alphabet",
                    ErrorCode.TREE_INVALID,
                    context=list(w)
                )
            if w:
                if w[1:] not in nodes:
                    raise estimation_error(
                        "Tree is not closed under taking parents",
                        ErrorCode.TREE_INVALID,
                        context=list(w)
                    )
                children[w[1:]].append(w)
        object.__setattr__(
            self, "_children", {w: tuple(sorted(c)) for w, c in children.items()}
        )

    @classmethod
    def root_only(cls, alphabet_size: int) -> "TreeShape":
        return cls(frozenset({()}), alphabet_size)

    @classmethod
    def full(cls, depth: int, alphabet_size: int) -> "TreeShape":
        """The complete tree holding every context of length <= depth."""
        nodes = set()
        for length in range(depth + 1):
            nodes.update(itertools.product(range(alphabet_size), repeat=length))
        return cls(frozenset(nodes), alphabet_size)

    @classmethod
    def closure(cls, contexts: Iterable[Context], alphabet_size: int) -> "TreeShape":
        """Smallest tree containing the given contexts."""
        nodes = {()}
        for w in contexts:
            w = tuple(w)
            for start in range(len(w)):
                nodes.add(w[start:])
        return cls(frozenset(nodes), alphabet_size)

    def __contains__(self, w: object) -> bool:
        return w in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def children(self, w: Context) -> Tuple[Context, ...]:
        return self._children.get(w, ())

    def is_leaf(self, w: Context) -> bool:
        return w in self.nodes and not self._children[w]

    def leaves(self) -> List[Context]:
        return sorted((w for w in self.nodes if not self._children[w]), key=_sort_key)

    def sorted_nodes(self) -> List[Context]:
        return sorted(self.nodes, key=_sort_key)

    @property
    def height(self) -> int:
        return max(len(w) for w in self.nodes)

    def is_complete(self) -> bool:
        return all(len(c) in (0, self.alphabet_size) for c in self._children.values())

    def missing_children(self) -> List[Context]:
        """Children that completion would add, in sorted order."""
        missing = []
        for w in self.sorted_nodes():
            kids = self._children[w]
            if kids and len(kids) < self.alphabet_size:
                missing.extend((a,) + w for a in range(self.alphabet_size) if (a,) + w not in self.nodes)
        return missing

    def completed(self) -> "TreeShape":
        return TreeShape(self.nodes | frozenset(self.missing_children()), self.alphabet_size)

    def is_subtree_of(self, other: "TreeShape") -> bool:
        return self.nodes <= other.nodes


def terminal_node(tree: TreeShape, past: Sequence[int]) -> Context:
    """
    Walk the tree along the past, newest symbol first.

    Returns the context x_{-K}..x_{-1} with K the largest k such that every
    suffix of length <= k is a node. Raises InsufficientHistoryError when the
    past runs out while the current node still has children.
    """
    node: Context = ()
    depth = 0
    while True:
        if not tree.children(node):
            return node
        if depth == len(past):
            raise InsufficientHistoryError(
                "Past is too short to resolve the terminal node",
                {"past_length": len(past), "reached": list(node)}
            )
        child = (int(past[len(past) - 1 - depth]),) + node
        if child not in tree.nodes:
            return node
        node = child
        depth += 1


def enumerate_complete_trees(alphabet_size: int, max_depth: int) -> Iterator[FrozenSet[Context]]:
    """Every complete tree of depth <= max_depth, as node sets."""

    def subtrees(w: Context, remaining: int) -> Iterator[FrozenSet[Context]]:
        yield frozenset({w})
        if remaining == 0:
            return
        options = [list(subtrees((a,) + w, remaining - 1)) for a in range(alphabet_size)]
        for combo in itertools.product(*options):
            nodes = {w}
            for part in combo:
                nodes |= part
            yield frozenset(nodes)

    yield from subtrees((), max_depth)


def count_complete_trees(alphabet_size: int, max_depth: int) -> int:
    count = 1
    for _ in range(max_depth):
        count = 1 + count ** alphabet_size
    return count
