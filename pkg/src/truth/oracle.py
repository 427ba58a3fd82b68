"""
Oracle quantities of a simulated sample.

The oracle probability p_bar(.|w) averages the true conditionals over the
realized occurrences of w; the approximation error c_w measures how far the
true conditionals of pasts extending w can be from it. The oracle tree
balances c_w against the confidence radius over complete trees of bounded
depth.
"""

import logging
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from src.config.exceptions import ErrorCode, simulation_error
from src.config.settings import settings
from src.core.alphabet import Context
from src.core.distances import SetFamily, distance_matrix, group_norm, metric_distance
from src.core.tree_shape import TreeShape, count_complete_trees, enumerate_complete_trees, terminal_node
from src.counting.count_trie import CountTrie
from src.confidence.radii import RadiusCalculator
from src.confidence.radius_table import RadiusTable
from src.models.estimation import EstimationConfig
from src.truth.simulate import SimulatedSample
from src.truth.true_models import FiniteTreeModel

logger = logging.getLogger(__name__)

VALUE_DECIMALS = 12


def occurrence_positions(seq: NDArray[np.int64], w: Context) -> NDArray[np.int64]:
    """0-based ending indices i <= n-2 of occurrences of w (those followed by a symbol)."""
    n = seq.size
    k = len(w)
    if n < 2 or k > n - 1:
        return np.empty(0, dtype=np.int64)
    idx = np.arange(k - 1 if k else 0, n - 1, dtype=np.int64)
    mask = np.ones(idx.size, dtype=bool)
    for offset in range(k):
        mask &= seq[idx - offset] == w[k - 1 - offset]
    return idx[mask]


class OracleEvaluator:
    """
    Cached oracle quantities for one simulated sample and configuration.

    Counts and radii are computed by direct scans of the sequences, so they
    exist for every context, materialized in a trie or not. They agree with
    the trie-based values on every trie node.
    """

    def __init__(
        self,
        sim: SimulatedSample,
        cfg: EstimationConfig,
        calculator: Optional[RadiusCalculator] = None
    ):
        self.sim = sim
        self.cfg = cfg
        self.group_count = sim.group_count
        self.alphabet_size = sim.alphabet.size
        self.calculator = calculator or RadiusCalculator(
            sim.n, sim.group_count, sim.alphabet.size, cfg.radius_config()
        )
        self._positions: Dict[Context, List[NDArray[np.int64]]] = {}
        self._oracle: Dict[Context, NDArray[np.float64]] = {}
        self._radii: Dict[Context, NDArray[np.float64]] = {}
        self._errors: Dict[Context, float] = {}

    def positions(self, w: Context) -> List[NDArray[np.int64]]:
        w = tuple(w)
        if w not in self._positions:
            self._positions[w] = [occurrence_positions(seq, w) for seq in self.sim.sequences]
        return self._positions[w]

    def counts(self, w: Context) -> NDArray[np.int64]:
        return np.array([pos.size for pos in self.positions(w)], dtype=np.int64)

    def visible(self, w: Context) -> bool:
        return bool(self.counts(w).min() > 0)

    def next_counts(self, w: Context) -> NDArray[np.int64]:
        out = np.zeros((self.group_count, self.alphabet_size), dtype=np.int64)
        for g, (seq, pos) in enumerate(zip(self.sim.sequences, self.positions(w))):
            if pos.size:
                out[g] = np.bincount(seq[pos + 1], minlength=self.alphabet_size)
        return out

    def empirical_probs(self, w: Context) -> NDArray[np.float64]:
        if not self.visible(w):
            return np.full((self.group_count, self.alphabet_size), 1.0 / self.alphabet_size)
        return self.next_counts(w) / self.counts(w)[:, None]

    def oracle_probs(self, w: Context) -> NDArray[np.float64]:
        """p_bar(.|w) for every group, shape (L, |A|)."""
        w = tuple(w)
        cached = self._oracle.get(w)
        if cached is not None:
            return cached
        if not self.visible(w):
            probs = np.full((self.group_count, self.alphabet_size), 1.0 / self.alphabet_size)
        else:
            probs = np.stack([
                cond[pos + 1].mean(axis=0)
                for cond, pos in zip(self.sim.conditionals, self.positions(w))
            ])
        self._oracle[w] = probs
        return probs

    def radii(self, w: Context) -> NDArray[np.float64]:
        """Monotonized radius vector conf*(w)."""
        w = tuple(w)
        cached = self._radii.get(w)
        if cached is not None:
            return cached
        if self.visible(w):
            values = self.calculator.raw_radii(self.counts(w).astype(np.float64), self.empirical_probs(w))
        else:
            values = np.ones(self.group_count)
        if w:
            values = np.maximum(values, self.radii(w[1:]))
        self._radii[w] = values
        return values

    def radius_norm(self, w: Context) -> float:
        return group_norm(self.radii(w), self.cfg.r)

    def approx_error(self, w: Context) -> float:
        """c_w: sup over per-group pasts z extending w of M_k{d(p(.|z), p_bar(.|w))}."""
        w = tuple(w)
        cached = self._errors.get(w)
        if cached is not None:
            return cached
        model = self.sim.model
        oracle = self.oracle_probs(w)
        per_group = []
        for g in range(self.group_count):
            candidates = model.conditional_range(w, g)
            per_group.append(max(metric_distance(row, oracle[g], self.cfg.fam) for row in candidates))
        value = group_norm(per_group, self.cfg.k)
        self._errors[w] = value
        return value

    def approx_error_bar(self, w: Context) -> float:
        """c_bar_w: sup over per-group pairs of pasts agreeing on w."""
        model = self.sim.model
        per_group = []
        for g in range(self.group_count):
            candidates = model.conditional_range(tuple(w), g)[:, None, :]
            per_group.append(float(distance_matrix(candidates, candidates, self.cfg.fam).max()))
        return group_norm(per_group, self.cfg.k)

    def leaf_value(self, w: Context) -> float:
        """c_w + R_r{conf(w)}, rounded so that ties are exact."""
        return round(self.approx_error(w) + self.radius_norm(w), VALUE_DECIMALS)


# ============================================================================
# Module-level operations
# ============================================================================

def oracle_prob(sim: SimulatedSample, w: Context, group: int, cfg: Optional[EstimationConfig] = None) -> NDArray[np.float64]:
    """p_bar_{n,l}(.|w); uniform when some group never sees w."""
    evaluator = OracleEvaluator(sim, cfg or EstimationConfig())
    return evaluator.oracle_probs(w)[group]


def oracle_prob_by_leaves(sim: SimulatedSample, w: Context, group: int) -> NDArray[np.float64]:
    """
    p_bar(.|w) for a finite model, aggregated by the true leaf of every occurrence.

    Occurrence weights come from the warm-up window and the sequence alone,
    independently of the stored per-position conditionals.
    """
    model = sim.model
    if not isinstance(model, FiniteTreeModel):
        raise simulation_error("Leaf aggregation needs a finite tree model", ErrorCode.TRUE_MODEL_INVALID)
    size = sim.alphabet.size
    counts = [occurrence_positions(seq, tuple(w)).size for seq in sim.sequences]
    if min(counts) == 0:
        return np.full(size, 1.0 / size)
    seq = sim.sequences[group]
    extended = np.concatenate([sim.warmup[group], seq])
    offset = sim.warmup[group].size
    leaf_counts: Dict[Context, int] = {}
    for i in occurrence_positions(seq, tuple(w)).tolist():
        past = extended[: offset + i + 1].tolist()
        leaf = terminal_node(model.shape, past)
        leaf_counts[leaf] = leaf_counts.get(leaf, 0) + 1
    total = sum(leaf_counts.values())
    return sum(count * model.law(leaf, group) for leaf, count in leaf_counts.items()) / total


def approx_error(sim: SimulatedSample, w: Context, cfg: EstimationConfig) -> float:
    return OracleEvaluator(sim, cfg).approx_error(w)


def approx_error_bar(sim: SimulatedSample, w: Context, cfg: EstimationConfig) -> float:
    return OracleEvaluator(sim, cfg).approx_error_bar(w)


# ============================================================================
# Oracle tree
# ============================================================================

def _leaves(nodes: Iterable[Context]) -> List[Context]:
    nodes = set(nodes)
    return [w for w in nodes if (0,) + w not in nodes]


def _sorted(nodes: Iterable[Context]) -> List[Context]:
    return sorted(nodes, key=lambda w: (len(w), w))


class _TreeKey:
    """Ordering of candidate trees: sup value, weighted average, size, node list."""

    def __init__(self, nodes: Iterable[Context], value, alphabet_size: int):
        self.nodes = frozenset(nodes)
        leaves = _leaves(self.nodes)
        values = {v: value(v) for v in leaves}
        self.sup = max(values.values())
        self.average = sum(
            (Fraction(values[v]) / Fraction(alphabet_size) ** len(v) for v in leaves),
            Fraction(0)
        )
        self.key = (self.sup, self.average, len(self.nodes), _sorted(self.nodes))


def _solve_exhaustive(value, alphabet_size: int, max_depth: int) -> frozenset:
    total = count_complete_trees(alphabet_size, max_depth)
    if total > settings.oracle_tree_budget:
        raise simulation_error(
            "Too many complete trees to enumerate",
            ErrorCode.ORACLE_BUDGET_EXCEEDED,
            trees=total,
            budget=settings.oracle_tree_budget,
            max_depth=max_depth
        )
    best: Optional[_TreeKey] = None
    for nodes in enumerate_complete_trees(alphabet_size, max_depth):
        candidate = _TreeKey(nodes, value, alphabet_size)
        if best is None or candidate.key < best.key:
            best = candidate
    return best.nodes


def _solve_dp(value, alphabet_size: int, max_depth: int) -> frozenset:
    """Bottom-up: minimize the sup, then with the sup as a cap minimize the rest."""
    sup_cache: Dict[Context, float] = {}

    def best_sup(w: Context) -> float:
        if w not in sup_cache:
            own = value(w)
            if len(w) < max_depth:
                split = max(best_sup((a,) + w) for a in range(alphabet_size))
                own = min(own, split)
            sup_cache[w] = own
        return sup_cache[w]

    cap = best_sup(())
    sub_cache: Dict[Context, Optional[Tuple[Fraction, int, List[Context]]]] = {}

    def best_sub(w: Context) -> Optional[Tuple[Fraction, int, List[Context]]]:
        if w in sub_cache:
            return sub_cache[w]
        options = []
        own = value(w)
        if own <= cap:
            options.append((Fraction(own) / Fraction(alphabet_size) ** len(w), 1, [w]))
        if len(w) < max_depth:
            parts = [best_sub((a,) + w) for a in range(alphabet_size)]
            if all(part is not None for part in parts):
                nodes = _sorted([w] + [v for part in parts for v in part[2]])
                options.append((sum((p[0] for p in parts), Fraction(0)), len(nodes), nodes))
        result = min(options) if options else None
        sub_cache[w] = result
        return result

    return frozenset(best_sub(())[2])


def solve_oracle_tree(
    sim: SimulatedSample,
    cfg: EstimationConfig,
    max_depth: int,
    method: str = "dp",
    evaluator: Optional[OracleEvaluator] = None
) -> TreeShape:
    """
    Complete tree of depth <= max_depth minimizing sup_x c_{T(x)} + R_r{conf(T(x))}.

    Ties are broken by the uniform-path-weighted average of the leaf values
    (with the optimal sup as a cap), then by the number of nodes, then by the
    sorted node list.
    """
    if max_depth < 0:
        raise simulation_error("max_depth must be non-negative", ErrorCode.TRUE_MODEL_INVALID, max_depth=max_depth)
    evaluator = evaluator or OracleEvaluator(sim, cfg)
    size = sim.alphabet.size
    if method == "exhaustive":
        nodes = _solve_exhaustive(evaluator.leaf_value, size, max_depth)
    elif method == "dp":
        nodes = _solve_dp(evaluator.leaf_value, size, max_depth)
    else:
        raise simulation_error(f"Unknown oracle solver '{method}'", ErrorCode.TRUE_MODEL_INVALID, method=method)
    return TreeShape(nodes, size)


def oracle_objective(tree: TreeShape, evaluator: OracleEvaluator) -> float:
    return max(evaluator.leaf_value(v) for v in tree.leaves())


# ============================================================================
# Good event
# ============================================================================

def good_ratios(
    oracle: NDArray[np.float64],
    empirical: NDArray[np.float64],
    radii: NDArray[np.float64],
    fam: SetFamily
) -> NDArray[np.float64]:
    distances = distance_matrix(empirical[None, :, :], oracle[None, :, :], fam)[0, 0]
    ratios = np.zeros_like(distances)
    positive = radii > 0
    ratios[positive] = distances[positive] / radii[positive]
    ratios[~positive & (distances > 0)] = np.inf
    return ratios


def check_good(
    sim: SimulatedSample,
    trie: CountTrie,
    radii: RadiusTable,
    m: float,
    fam: SetFamily,
    evaluator: Optional[OracleEvaluator] = None
) -> bool:
    """
    Good_m: ||{d_l(p_bar, p_hat) / conf_l(w)}||_{L,m} <= 1 at every visible node.

    The trie must contain every visible node, except descendants that
    cannot change the answer: those of a node seen once per group (they
    repeat its occurrence, so p_bar, p_hat and radii coincide) and those of a
    node whose radii are all 1 (d <= 1 everywhere). Tries fitted with
    ``frontier="good"`` satisfy this. Nodes carrying ``value_sums`` of the
    true conditionals or their positions avoid rescanning the sample.
    """
    evaluator = evaluator or OracleEvaluator(sim, EstimationConfig(fam=fam))
    for node in trie:
        if not node.visible:
            continue
        if node.value_sums is not None:
            oracle = node.value_sums / node.counts_ctx[:, None]
        elif node.positions is not None:
            oracle = np.stack([
                cond[pos + 1].mean(axis=0)
                for cond, pos in zip(sim.conditionals, node.positions)
            ])
        else:
            oracle = evaluator.oracle_probs(node.context)
        ratios = good_ratios(oracle, node.probabilities(), radii.get(node.context), fam)
        if group_norm(ratios, m) > 1.0 + 1e-12:
            logger.debug("Good event fails", extra={"context": list(node.context)})
            return False
    return True

