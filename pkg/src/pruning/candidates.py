"""
Candidate lists for the removal test.

CanRmv(w) compares every (p_hat, conf) pair below w with every pair below
parent(w). A pair can only violate the test when c R_r{conf(w')} +
c R_r{conf(w'')} < 1, because both metrics are bounded by 1; hence a list keeps
only "informative" entries with c R < 1. Entries sharing the same p_hat matrix
are merged keeping the smallest radius norm, the only one that can produce a
violation. Lists are merged bottom-up over the whole trie so that a node's
list covers its full subtree of E_n, independently of the order in which
leaves are examined.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from src.config.exceptions import ErrorCode, estimation_error
from src.core.alphabet import Context
from src.core.distances import distance_matrix, group_norm_rows
from src.counting.count_trie import CountTrie
from src.confidence.radius_table import RadiusTable
from src.models.estimation import EstimationConfig

logger = logging.getLogger(__name__)

CHUNK_ELEMENTS = 4_000_000

Entries = Tuple[NDArray[np.float64], NDArray[np.float64]]


def _empty(group_count: int, alphabet_size: int) -> Entries:
    return np.empty((0, group_count, alphabet_size)), np.empty(0)


def _compress(probs: NDArray[np.float64], norms: NDArray[np.float64]) -> Entries:
    """Keep one entry per distinct p_hat matrix (the smallest norm), sorted by norm."""
    if probs.shape[0] <= 1:
        return probs, norms
    flat = probs.reshape(probs.shape[0], -1)
    unique, inverse = np.unique(flat, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    best = np.full(unique.shape[0], np.inf)
    np.minimum.at(best, inverse, norms)
    order = np.argsort(best, kind="stable")
    return unique[order].reshape((-1,) + probs.shape[1:]), best[order]


class CandidateLists:
    """Informative (p_hat, R_r{conf}) entries per subtree of the trie."""

    def __init__(self, trie: CountTrie, radii: RadiusTable, cfg: EstimationConfig):
        self.trie = trie
        self.radii = radii
        self.cfg = cfg
        self.group_count = trie.group_count
        self.alphabet_size = trie.alphabet.size
        self._own: Dict[Context, Entries] = {}
        self._lists: Dict[Context, Entries] = {}

    def own_entry(self, w: Context) -> Entries:
        cached = self._own.get(w)
        if cached is not None:
            return cached
        node = self.trie.get(w)
        norm = self.radii.norm(w, self.cfg.r)
        if node is None or self.cfg.c * norm >= 1.0:
            entry = _empty(self.group_count, self.alphabet_size)
        else:
            entry = node.probabilities()[None, :, :], np.array([norm])
        self._own[w] = entry
        return entry

    def subtree_list(self, w: Context) -> Entries:
        """Entries for every trie node extending w (w included)."""
        cached = self._lists.get(w)
        if cached is not None:
            return cached
        start = self.trie.get(w)
        if start is None:
            return _empty(self.group_count, self.alphabet_size)
        # iterative post-order: children lists before parents
        stack: List[Tuple[Context, bool]] = [(w, False)]
        while stack:
            ctx, children_done = stack.pop()
            if ctx in self._lists:
                continue
            node = self.trie.get(ctx)
            if not children_done:
                stack.append((ctx, True))
                for child in node.children.values():
                    if child.context not in self._lists:
                        stack.append((child.context, False))
                continue
            parts = [self.own_entry(ctx)] + [self._lists[c.context] for c in node.children.values()]
            probs = np.concatenate([p for p, _ in parts], axis=0)
            norms = np.concatenate([n for _, n in parts], axis=0)
            self._lists[ctx] = _compress(probs, norms)
        return self._lists[w]

    def first_violation(self, left: Entries, right: Entries) -> Optional[Tuple[int, int]]:
        """Indices of the first pair with M_k{d} > c (R' + R''), or None."""
        left_probs, left_norms = left
        right_probs, right_norms = right
        if left_probs.shape[0] == 0 or right_probs.shape[0] == 0:
            return None
        per_row = max(1, right_probs.shape[0] * self.group_count * self.alphabet_size)
        chunk = max(1, CHUNK_ELEMENTS // per_row)
        c = self.cfg.c
        for start in range(0, left_probs.shape[0], chunk):
            stop = min(start + chunk, left_probs.shape[0])
            distances = distance_matrix(left_probs[start:stop], right_probs, self.cfg.fam)
            aggregated = group_norm_rows(distances, self.cfg.k)
            threshold = c * (left_norms[start:stop, None] + right_norms[None, :])
            hits = np.argwhere(aggregated > threshold)
            if hits.size:
                return int(hits[0, 0]) + start, int(hits[0, 1])
        return None

    def can_remove(self, w: Context) -> bool:
        if len(w) == 0:
            raise estimation_error(
                "The root is never examined for removal",
                ErrorCode.ROOT_NOT_REMOVABLE
            )
        left = self.subtree_list(w)
        if self.cfg.restricted_candidates:
            right = self.own_entry(w[1:])
        else:
            right = self.subtree_list(w[1:])
        return self.first_violation(left, right) is None
