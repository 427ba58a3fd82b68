"""
Tests for true models, the simulator, oracle quantities and the Good event.
"""
import math

import numpy as np
import pytest

from src.config.exceptions import ErrorCode, SimulationError
from src.core.distances import SetFamily
from src.core.tree_shape import TreeShape
from src.counting.count_trie import build_count_trie
from src.confidence.radii import RadiusMode
from src.confidence.radius_table import RadiusTable
from src.models.estimation import EstimationConfig
from src.pruning.prune_tree import fit_model
from src.truth.oracle import (
    OracleEvaluator,
    approx_error,
    approx_error_bar,
    check_good,
    oracle_objective,
    oracle_prob,
    oracle_prob_by_leaves,
    occurrence_positions,
    solve_oracle_tree,
)
from src.truth.simulate import simulate
from src.truth.true_models import (
    FiniteTreeModel,
    RenewalModel,
    make_depth1_population,
    make_order3_chain,
    make_renewal,
    stationary_law,
    true_prob,
    true_tree_contains,
)
from src.core.alphabet import Alphabet


@pytest.fixture(scope="module")
def order3_sim():
    return simulate(make_order3_chain(), 2000, 1, 42)


# ============================================================================
# True models
# ============================================================================

@pytest.mark.unit
class TestOrder3Chain:
    """Full binary chain of order 3"""

    def test_leaf_laws(self):
        model = make_order3_chain()
        assert model.height == 3
        assert len(model.shape.leaves()) == 8
        assert model.law((0, 0, 0)).tolist() == [0.75, 0.25]
        assert model.law((1, 1, 0)).tolist() == [0.25, 0.75]
        assert model.law((0, 1, 1)).tolist() == [0.5, 0.5]

    def test_true_prob_uses_terminal_leaf(self):
        model = make_order3_chain()
        assert true_prob(model, [1, 0, 0, 0]).tolist() == [0.75, 0.25]
        assert model.group_count is None
        assert true_tree_contains(model, (1, 0, 1))
        assert not true_tree_contains(model, (0, 0, 0, 0))

    def test_transition_rows_sum_to_one(self):
        matrix = make_order3_chain().transition_matrix()
        assert matrix.shape == (8, 8)
        assert np.allclose(matrix.sum(axis=1), 1.0)

    def test_stationary_law_is_invariant(self):
        model = make_order3_chain()
        law = stationary_law(model)
        assert law.sum() == pytest.approx(1.0)
        assert np.all(law > 0)
        assert np.allclose(law @ model.transition_matrix(), law, atol=1e-12)

    def test_incomplete_tree_rejected(self):
        shape = TreeShape.closure([(0, 1)], 2)
        with pytest.raises(SimulationError) as exc_info:
            FiniteTreeModel(Alphabet.binary(), shape, {w: [0.5, 0.5] for w in shape.leaves()})
        assert exc_info.value.error_code == ErrorCode.TRUE_MODEL_INVALID

    def test_missing_leaf_law_rejected(self):
        with pytest.raises(SimulationError):
            FiniteTreeModel(Alphabet.binary(), TreeShape.full(1, 2), {(0,): [0.5, 0.5]})


@pytest.mark.unit
class TestRenewalModel:
    """Renewal chain with gaps P(t=k) = C / (k (4k^2 - 1))"""

    def test_gap_law(self):
        model = make_renewal()
        assert float(model.pmf(1)) == pytest.approx(0.862900, abs=1e-6)
        assert float(model.pmf(2)) == pytest.approx(0.0862900, abs=1e-7)
        assert model.survival(0) == pytest.approx(1.0, abs=1e-9)

    def test_hazard(self):
        model = make_renewal()
        assert model.hazard(0) == pytest.approx(float(model.pmf(1)))
        assert model.hazard(3) == pytest.approx(float(model.pmf(4)) / model.survival(3))

    def test_true_prob_counts_zeros_since_last_one(self):
        model = make_renewal()
        h0 = model.hazard(0)
        assert np.allclose(model.true_prob([0, 1]), [1.0 - h0, h0])
        h2 = model.hazard(2)
        assert np.allclose(model.true_prob([1, 1, 0, 0]), [1.0 - h2, h2])

    def test_true_prob_needs_a_one_or_an_age(self):
        model = make_renewal()
        with pytest.raises(SimulationError) as exc_info:
            model.true_prob([0, 0, 0])
        assert exc_info.value.error_code == ErrorCode.INSUFFICIENT_PAST
        h5 = model.hazard(5)
        assert np.allclose(model.true_prob([0, 0, 0], age=2), [1.0 - h5, h5])

    def test_compatible_tree(self):
        model = make_renewal()
        assert model.contains(())
        assert model.contains((1, 0, 0))
        assert model.contains((0, 0, 0))
        assert not model.contains((0, 1, 0))

    def test_mean_gap(self):
        model = RenewalModel()
        k = np.arange(1, 200_001)
        partial = float(np.sum(k * model.pmf(k)))
        assert partial == pytest.approx(model.mean_gap(), rel=1e-4)


@pytest.mark.unit
class TestPopulationModel:
    """Heterogeneous depth-1 groups"""

    def test_group_laws_spread_linearly(self):
        model = make_depth1_population(5)
        assert model.group_count == 5
        ones = [model.true_prob([0], g)[1] for g in range(5)]
        assert ones == pytest.approx([0.3, 0.4, 0.5, 0.6, 0.7])
        assert model.true_prob([1], 3).tolist() == pytest.approx([0.8, 0.2])


# ============================================================================
# Simulation
# ============================================================================

@pytest.mark.unit
class TestSimulate:
    """Stationary draws with per-position conditionals"""

    def test_seed_determinism(self):
        first = simulate(make_order3_chain(), 500, 2, 7)
        second = simulate(make_order3_chain(), 500, 2, 7)
        for a, b in zip(first.sequences, second.sequences):
            assert np.array_equal(a, b)

    def test_conditionals_match_true_model(self):
        model = make_order3_chain()
        sim = simulate(model, 300, 1, 3)
        extended = np.concatenate([sim.warmup[0], sim.sequences[0]]).tolist()
        offset = sim.warmup[0].size
        for i in range(0, 300, 17):
            past = extended[: offset + i]
            assert np.allclose(sim.conditionals[0][i], model.true_prob(past))

    def test_group_count_must_match_population(self):
        with pytest.raises(SimulationError) as exc_info:
            simulate(make_depth1_population(3), 100, 2, 0)
        assert exc_info.value.error_code == ErrorCode.TRUE_MODEL_INVALID

    def test_invalid_size(self):
        with pytest.raises(SimulationError):
            simulate(make_order3_chain(), 0, 1, 0)

    def test_renewal_sample_is_binary(self):
        sim = simulate(make_renewal(), 1000, 2, 5)
        assert sim.group_count == 2
        assert set(np.unique(np.concatenate(sim.sequences)).tolist()) <= {0, 1}
        assert sim.conditionals[0].shape == (1000, 2)

    @pytest.mark.slow
    @pytest.mark.statistical
    def test_leaf_frequency_converges(self):
        sim = simulate(make_order3_chain(), 200_000, 1, 11)
        trie = build_count_trie(sim.sample, max_depth=3)
        assert trie.get((0, 0, 0)).probabilities()[0][0] == pytest.approx(0.75, abs=0.01)

    @pytest.mark.slow
    @pytest.mark.statistical
    def test_renewal_mean_gap(self):
        model = make_renewal()
        sim = simulate(model, 200_000, 1, 13)
        ones = np.flatnonzero(sim.sequences[0] == 1)
        assert np.diff(ones).mean() == pytest.approx(model.mean_gap(), rel=0.05)


# ============================================================================
# Oracle quantities
# ============================================================================

@pytest.mark.unit
class TestOracle:
    """p_bar, c_w and c_bar_w"""

    def test_occurrence_positions(self):
        seq = np.array([0, 1, 0, 1, 0])
        assert occurrence_positions(seq, (0,)).tolist() == [0, 2]
        assert occurrence_positions(seq, (0, 1)).tolist() == [1, 3]
        assert occurrence_positions(seq, ()).tolist() == [0, 1, 2, 3]

    def test_full_context_gives_leaf_law(self, order3_sim):
        assert oracle_prob(order3_sim, (1, 0, 0, 0), 0) == pytest.approx([0.75, 0.25])
        assert approx_error(order3_sim, (0, 0, 0), EstimationConfig()) == pytest.approx(0.0)

    def test_unseen_context_is_uniform(self, order3_sim):
        assert oracle_prob(order3_sim, (0,) * 60, 0).tolist() == [0.5, 0.5]

    def test_root_mixture_two_ways(self, order3_sim):
        direct = oracle_prob(order3_sim, (), 0)
        by_leaves = oracle_prob_by_leaves(order3_sim, (), 0)
        assert np.allclose(direct, by_leaves)
        assert np.allclose(oracle_prob(order3_sim, (1, 0), 0), oracle_prob_by_leaves(order3_sim, (1, 0), 0))

    def test_pairwise_error_at_root(self, order3_sim):
        assert approx_error_bar(order3_sim, (), EstimationConfig()) == pytest.approx(0.5)

    def test_error_chain(self, order3_sim):
        cfg = EstimationConfig()
        for w in [(), (0,), (1,), (0, 1), (1, 1), (0, 0)]:
            c = approx_error(order3_sim, w, cfg)
            c_bar = approx_error_bar(order3_sim, w, cfg)
            assert c <= c_bar + 1e-12
            assert c_bar <= 2.0 * c + 1e-12

    def test_radii_agree_with_trie(self, order3_sim):
        cfg = EstimationConfig()
        fit = fit_model(order3_sim.sample, cfg, frontier="none", max_depth=3)
        evaluator = OracleEvaluator(order3_sim, cfg)
        for node in fit.trie:
            assert np.allclose(evaluator.radii(node.context), fit.radii.get(node.context))
            assert evaluator.counts(node.context).tolist() == node.counts_ctx.tolist()


@pytest.mark.unit
class TestOracleTree:
    """Complete tree minimizing bias plus radius"""

    @pytest.mark.parametrize("cfg", [EstimationConfig(), EstimationConfig.for_dynamic_programming()])
    @pytest.mark.parametrize("depth", [1, 2, 3])
    def test_exhaustive_matches_bottom_up(self, order3_sim, cfg, depth):
        evaluator = OracleEvaluator(order3_sim, cfg)
        exhaustive = solve_oracle_tree(order3_sim, cfg, depth, method="exhaustive", evaluator=evaluator)
        bottom_up = solve_oracle_tree(order3_sim, cfg, depth, method="dp", evaluator=evaluator)
        assert exhaustive.nodes == bottom_up.nodes
        assert exhaustive.is_complete()
        assert exhaustive.height <= depth

    def test_optimal_among_all_complete_trees(self, order3_sim):
        cfg = EstimationConfig()
        evaluator = OracleEvaluator(order3_sim, cfg)
        best = solve_oracle_tree(order3_sim, cfg, 2, evaluator=evaluator)
        root = oracle_objective(TreeShape.root_only(2), evaluator)
        full = oracle_objective(TreeShape.full(2, 2), evaluator)
        assert oracle_objective(best, evaluator) <= min(root, full)

    def test_unknown_method(self, order3_sim):
        with pytest.raises(SimulationError):
            solve_oracle_tree(order3_sim, EstimationConfig(), 2, method="greedy")


# ============================================================================
# Good event
# ============================================================================

@pytest.mark.unit
class TestGoodEvent:
    """Distances between p_hat and p_bar within the radii"""

    def test_unit_radii_always_good(self, order3_sim):
        trie = build_count_trie(order3_sim.sample, max_depth=6)
        ones = RadiusTable({w: np.ones(1) for w in trie.nodes}, 1)
        assert check_good(order3_sim, trie, ones, 2.0, SetFamily.SINGLETONS)

    def test_tiny_radii_fail(self, order3_sim):
        trie = build_count_trie(order3_sim.sample, max_depth=3)
        tiny = RadiusTable({w: np.full(1, 1e-9) for w in trie.nodes}, 1)
        assert not check_good(order3_sim, trie, tiny, 2.0, SetFamily.SINGLETONS)

    def test_value_sums_match_rescans(self, order3_sim):
        cfg = EstimationConfig()
        fit = fit_model(order3_sim.sample, cfg, frontier="good", position_values=order3_sim.conditionals)
        evaluator = OracleEvaluator(order3_sim, cfg)
        for node in fit.trie.visible_nodes():
            oracle = node.value_sums / node.counts_ctx[:, None]
            assert np.allclose(oracle, evaluator.oracle_probs(node.context))

    @pytest.mark.slow
    @pytest.mark.statistical
    def test_coverage_of_inf_radii(self):
        # 95% nominal less three binomial standard deviations over 200 runs
        cfg = EstimationConfig(radius_mode=RadiusMode.INF)
        hits = 0
        replications = 200
        for seed in range(replications):
            sim = simulate(make_order3_chain(), 2500, 10, seed)
            fit = fit_model(sim.sample, cfg, frontier="good", position_values=sim.conditionals)
            hits += check_good(sim, fit.trie, fit.radii, math.inf, cfg.fam)
        assert hits / replications >= 0.93

    @pytest.mark.slow
    @pytest.mark.statistical
    def test_coverage_of_l2_radii(self):
        cfg = EstimationConfig(radius_mode=RadiusMode.L2)
        hits = 0
        replications = 200
        for seed in range(replications):
            sim = simulate(make_order3_chain(), 5000, 100, seed)
            fit = fit_model(sim.sample, cfg, frontier="good", position_values=sim.conditionals)
            assert not fit.radii.l2_fallback
            hits += check_good(sim, fit.trie, fit.radii, 2.0, cfg.fam)
        assert hits / replications >= 0.93
