"""
Leaf-pruning selection of the group context tree.

``prune_tree`` repeatedly examines unexamined leaves of the current tree
(starting from E_n) and removes those passing the removal test. The root is
never examined. The result does not depend on the examination order: it is
the smallest tree containing every node whose removal test fails, which
``smallest_tree_bruteforce`` computes directly.
"""

import heapq
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from numpy.typing import NDArray

from src.config.exceptions import ErrorCode, estimation_error
from src.core.alphabet import Context
from src.core.distances import group_norm, metric_distance
from src.core.tree_shape import TreeShape
from src.counting.count_trie import CountTrie, GroupSample, TrieNode, build_count_trie
from src.confidence.radii import RadiusCalculator
from src.confidence.radius_table import IncrementalRadii, RadiusTable
from src.models.estimation import EstimationConfig
from src.pruning.candidates import CandidateLists
from src.pruning.context_model import ContextTreeModel

logger = logging.getLogger(__name__)


def can_remove(w: Context, trie: CountTrie, radii: RadiusTable, cfg: EstimationConfig) -> bool:
    """CanRmv(w) for a single node; see :class:`CandidateLists` for repeated use."""
    if len(w) == 0:
        raise estimation_error("The root is never examined for removal", ErrorCode.ROOT_NOT_REMOVABLE)
    return CandidateLists(trie, radii, cfg).can_remove(tuple(w))


def _model_from(shape: TreeShape, trie: CountTrie, radii: RadiusTable, cfg: EstimationConfig) -> ContextTreeModel:
    distributions = {}
    counts_ctx = {}
    next_counts = {}
    for w in shape.nodes:
        node = trie.get(w)
        distributions[w] = node.probabilities()
        counts_ctx[w] = node.counts_ctx
        next_counts[w] = node.next_counts
    return ContextTreeModel(
        alphabet=trie.alphabet,
        shape=shape,
        distributions=distributions,
        counts_ctx=counts_ctx,
        next_counts=next_counts,
        radii=radii.restricted(shape.nodes),
        config=cfg,
        lengths=trie.sample.lengths,
    )


def prune_tree(
    trie: CountTrie,
    radii: RadiusTable,
    cfg: EstimationConfig,
    order: str = "deepest",
    rng: Optional[np.random.Generator] = None,
    candidates: Optional[CandidateLists] = None
) -> ContextTreeModel:
    """
    Run the pruning loop over the trie.

    Args:
        trie: the count trie E_n
        radii: monotonized radius table for the trie nodes
        cfg: estimation settings
        order: "deepest" examines deepest leaves first (ties by context);
            "random" picks uniformly among unexamined leaves using ``rng``
        rng: generator for the random order
        candidates: reuse precomputed candidate lists

    Returns:
        ContextTreeModel on the pruned tree
    """
    if order not in ("deepest", "random"):
        raise estimation_error(f"Unknown examination order '{order}'", ErrorCode.TREE_INVALID, order=order)
    lists = candidates or CandidateLists(trie, radii, cfg)
    rng = rng or np.random.default_rng(0)

    current: Set[Context] = set(trie.nodes)
    remaining: Dict[Context, int] = {w: len(trie.get(w).children) for w in current}
    examined: Set[Context] = set()

    initial = [w for w, count in remaining.items() if count == 0 and len(w) > 0]
    heap: List[Tuple[int, Context]] = []
    pool: List[Context] = []
    if order == "deepest":
        heap = [(-len(w), w) for w in initial]
        heapq.heapify(heap)
    else:
        pool = sorted(initial)

    removed = 0
    while heap or pool:
        if order == "deepest":
            _, w = heapq.heappop(heap)
        else:
            idx = int(rng.integers(len(pool)))
            pool[idx], pool[-1] = pool[-1], pool[idx]
            w = pool.pop()
        examined.add(w)
        if not lists.can_remove(w):
            continue
        current.discard(w)
        removed += 1
        p = w[1:]
        remaining[p] -= 1
        if remaining[p] == 0 and len(p) > 0 and p not in examined:
            if order == "deepest":
                heapq.heappush(heap, (-len(p), p))
            else:
                pool.append(p)

    shape = TreeShape(frozenset(current), trie.alphabet.size)
    logger.debug(
        "Pruning finished",
        extra={"trie_nodes": len(trie), "removed": removed, "kept": len(shape)}
    )
    return _model_from(shape, trie, radii, cfg)


def _bruteforce_can_remove(w: Context, trie: CountTrie, radii: RadiusTable, cfg: EstimationConfig) -> bool:
    below_w = list(trie.subtree(w))
    if cfg.restricted_candidates:
        below_parent = [trie.get(w[1:])]
    else:
        below_parent = list(trie.subtree(w[1:]))
    for first in below_w:
        p1 = first.probabilities()
        r1 = group_norm(radii.get(first.context), cfg.r)
        for second in below_parent:
            p2 = second.probabilities()
            distances = [metric_distance(p1[g], p2[g], cfg.fam) for g in range(trie.group_count)]
            r2 = group_norm(radii.get(second.context), cfg.r)
            if group_norm(distances, cfg.k) > cfg.c * r1 + cfg.c * r2:
                return False
    return True


def smallest_tree_bruteforce(trie: CountTrie, radii: RadiusTable, cfg: EstimationConfig) -> TreeShape:
    """Suffix closure of all nodes whose removal test fails, by direct pair scans."""
    keep = [w for w in trie.nodes if len(w) > 0 and not _bruteforce_can_remove(w, trie, radii, cfg)]
    return TreeShape.closure(keep, trie.alphabet.size)


def survivor_witness(
    v: Context, trie: CountTrie, radii: RadiusTable, cfg: EstimationConfig
) -> Optional[Tuple[Context, Context]]:
    """A pair (w', w'') with w' extending v and w'' extending parent(v) that violates the test."""
    for first in trie.subtree(v):
        p1 = first.probabilities()
        r1 = radii.norm(first.context, cfg.r)
        if cfg.c * r1 >= 1.0:
            continue
        for second in trie.subtree(v[1:]):
            r2 = radii.norm(second.context, cfg.r)
            if cfg.c * (r1 + r2) >= 1.0:
                continue
            p2 = second.probabilities()
            distances = [metric_distance(p1[g], p2[g], cfg.fam) for g in range(trie.group_count)]
            if group_norm(distances, cfg.k) > cfg.c * (r1 + r2):
                return first.context, second.context
    return None


# ============================================================================
# Full estimation pipeline
# ============================================================================

@dataclass
class FitResult:
    model: ContextTreeModel
    trie: CountTrie
    radii: RadiusTable
    timings: Dict[str, float] = field(default_factory=dict)


class EstimationFrontier:
    """
    Materialization rule for the count trie used by :func:`fit_model`.

    A node's descendants are not built when every group has at most one
    context occurrence (all extensions repeat the node's p_hat and radii), or
    when c R_r{conf(w)} >= 1 (radii only grow along extension, so no pair
    involving the subtree can violate the removal test). Neither rule changes
    the pruned tree.

    With ``good_exact`` the second rule also requires every radius of the
    node to be capped at 1, so that the Good event can be checked on the
    materialized nodes alone.
    """

    def __init__(self, cfg: EstimationConfig, radii: IncrementalRadii, good_exact: bool = False):
        self.cfg = cfg
        self.radii = radii
        self.good_exact = good_exact

    def __call__(self, node: TrieNode) -> bool:
        values = self.radii.radii_for(node)
        if node.counts_ctx.max() <= 1:
            return False
        if self.cfg.c * group_norm(values, self.cfg.r) < 1.0:
            return True
        return self.good_exact and not bool(np.all(values >= 1.0))


FRONTIERS = ("exact", "good", "none")


def fit_model(
    sample: GroupSample,
    cfg: EstimationConfig,
    max_depth: Optional[int] = None,
    keep_positions: bool = False,
    frontier: str = "exact",
    order: str = "deepest",
    rng: Optional[np.random.Generator] = None,
    position_values: Optional[Sequence[NDArray[np.float64]]] = None
) -> FitResult:
    """
    Count, compute radii and prune.

    Args:
        sample: the grouped sequences
        cfg: estimation settings
        max_depth: optional cap on context length
        keep_positions: keep occurrence positions in the trie
        frontier: "exact" (smallest trie giving the same tree), "good" (also
            exact for the Good event) or "none" (all of E_n)
        order: leaf examination order for :func:`prune_tree`
        rng: generator for the random order
        position_values: per-position values summed per node (see
            :func:`build_count_trie`)
    """
    if frontier not in FRONTIERS:
        raise estimation_error(f"Unknown frontier '{frontier}'", ErrorCode.TREE_INVALID, frontier=frontier)
    timings: Dict[str, float] = {}
    calculator = RadiusCalculator(sample.n, sample.group_count, sample.alphabet.size, cfg.radius_config())
    incremental = IncrementalRadii(calculator)
    expand = None
    if frontier != "none":
        expand = EstimationFrontier(cfg, incremental, good_exact=frontier == "good")

    start = time.perf_counter()
    trie = build_count_trie(
        sample,
        max_depth=max_depth,
        keep_positions=keep_positions,
        expand=expand,
        position_values=position_values
    )
    timings["count"] = time.perf_counter() - start

    start = time.perf_counter()
    for node in trie:
        incremental.radii_for(node)
    radii = incremental.table()
    timings["radii"] = time.perf_counter() - start

    start = time.perf_counter()
    model = prune_tree(trie, radii, cfg, order=order, rng=rng)
    timings["prune"] = time.perf_counter() - start

    logger.info(
        "Model fitted",
        extra={
            "groups": sample.group_count,
            "n": sample.n,
            "trie_nodes": len(trie),
            "trie_truncated": trie.is_truncated(),
            "tree_nodes": len(model.shape),
            "height": model.shape.height,
            "l2_fallback": radii.l2_fallback,
        }
    )
    return FitResult(model=model, trie=trie, radii=radii, timings=timings)
