"""
Tests for the estimation settings, the removal test, pruning, completion and prediction.
"""
import logging
import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.config.exceptions import ErrorCode, EstimationError, InsufficientHistoryError
from src.core.alphabet import Alphabet
from src.core.distances import SetFamily
from src.core.tree_shape import TreeShape
from src.counting.count_trie import build_count_trie
from src.confidence.radius_table import RadiusTable, build_radius_table
from src.models.estimation import EstimationConfig, condition_holds
from src.pruning.context_model import complete_model, predict
from src.pruning.prune_tree import (
    can_remove,
    fit_model,
    prune_tree,
    smallest_tree_bruteforce,
    survivor_witness,
)
from src.truth.simulate import simulate
from src.truth.true_models import make_order3_chain, make_population_model
from tests.conftest import make_model, make_sample


def constant_radii(trie, value):
    return RadiusTable({w: np.full(trie.group_count, value) for w in trie.nodes}, trie.group_count)


@pytest.fixture
def order3_instances():
    """Small simulated tries with their radius tables."""
    truth = make_order3_chain()
    instances = []
    for seed, groups in ((1, 1), (2, 2), (3, 3)):
        sim = simulate(truth, 300, groups, seed)
        trie = build_count_trie(sim.sample, max_depth=5)
        instances.append(trie)
    return instances


# ============================================================================
# Estimation settings
# ============================================================================

@pytest.mark.unit
class TestEstimationConfig:
    """Exponent condition and presets"""

    def test_defaults(self):
        cfg = EstimationConfig()
        assert cfg.fam is SetFamily.SINGLETONS
        assert (cfg.k, cfg.r, cfg.m) == (1.0, 2.0, 2.0)
        assert cfg.c == pytest.approx(1.01)
        assert cfg.delta == pytest.approx(0.05)

    def test_condition(self):
        assert condition_holds(1, 2, 2)
        assert condition_holds(1, math.inf, math.inf)
        assert condition_holds(2, math.inf, 2)
        assert not condition_holds(2, 3, 2)
        assert not condition_holds(3, 4, 2)

    def test_invalid_exponents_rejected(self):
        with pytest.raises(ValidationError):
            EstimationConfig(k=2, r=3, m=2)

    def test_presets(self):
        dp = EstimationConfig.for_dynamic_programming()
        assert dp.fam is SetFamily.ALL_SUBSETS
        assert math.isinf(dp.k) and math.isinf(dp.r) and math.isinf(dp.m)
        dcm = EstimationConfig.for_discrete_choice(c=1.5)
        assert (dcm.k, dcm.r, dcm.m, dcm.c) == (1.0, 2.0, 2.0, 1.5)

    def test_echo_round_trip(self):
        cfg = EstimationConfig.for_dynamic_programming(delta=0.1)
        echo = cfg.echo()
        assert echo["k"] == "inf"
        assert EstimationConfig(**echo) == cfg


# ============================================================================
# Removal test
# ============================================================================

@pytest.mark.unit
class TestCanRemove:
    """CanRmv(w) over all pairs below w and parent(w)"""

    def test_opposite_laws_block_removal(self, periodic_sample):
        trie = build_count_trie(periodic_sample, max_depth=1)
        radii = constant_radii(trie, 0.2)
        assert not can_remove((0,), trie, radii, EstimationConfig())

    def test_identical_laws_allow_removal(self, periodic_sample):
        trie = build_count_trie(periodic_sample, max_depth=2)
        radii = constant_radii(trie, 0.2)
        assert can_remove((1, 0), trie, radii, EstimationConfig())

    def test_equality_counts_as_removable(self, periodic_sample):
        trie = build_count_trie(periodic_sample, max_depth=1)
        radii = constant_radii(trie, 0.5)
        assert can_remove((0,), trie, radii, EstimationConfig(c=1.0))

    def test_root_is_never_examined(self, periodic_sample):
        trie = build_count_trie(periodic_sample, max_depth=1)
        with pytest.raises(EstimationError) as exc_info:
            can_remove((), trie, constant_radii(trie, 0.2), EstimationConfig())
        assert exc_info.value.error_code == ErrorCode.ROOT_NOT_REMOVABLE

    def test_single_violating_pair_suffices(self):
        # p_hat(.|1) = (5/6, 1/6), p_hat(.|0) = (1/7, 6/7), p_hat(.|e) = (6/13, 7/13)
        sample = make_sample("0 1 0 1 0 1 1 0 0 1 0 1 0 1")
        trie = build_count_trie(sample, max_depth=1)
        cfg = EstimationConfig()
        loose = RadiusTable({(): [0.5], (0,): [0.5], (1,): [0.3]}, 1)
        assert can_remove((1,), trie, loose, cfg)
        tight = RadiusTable({(): [0.5], (0,): [0.01], (1,): [0.3]}, 1)
        assert not can_remove((1,), trie, tight, cfg)


# ============================================================================
# Pruning
# ============================================================================

@pytest.mark.unit
class TestPruneTree:
    """Leaf pruning and its characterization"""

    def test_periodic_sample(self, periodic_sample):
        result = fit_model(periodic_sample, EstimationConfig())
        assert result.model.shape.nodes == frozenset({(), (0,), (1,)})
        assert predict(result.model, [1, 0], 0).tolist() == [0.0, 1.0]
        assert predict(result.model, [0, 1], 0).tolist() == [1.0, 0.0]

    def test_frontier_does_not_change_the_tree(self, periodic_sample):
        exact = fit_model(periodic_sample, EstimationConfig(), max_depth=8)
        full = fit_model(periodic_sample, EstimationConfig(), max_depth=8, frontier="none")
        assert exact.model.shape.nodes == full.model.shape.nodes
        assert len(exact.trie) <= len(full.trie)

    def test_single_symbol_gives_root(self):
        result = fit_model(make_sample("1"), EstimationConfig())
        assert result.model.shape.nodes == frozenset({()})

    def test_fit_log_reports_trie_truncation(self, random_sample, caplog):
        caplog.set_level(logging.INFO, logger="src.pruning.prune_tree")
        fit_model(random_sample, EstimationConfig())
        fit_model(random_sample, EstimationConfig(), max_depth=3, frontier="none")
        records = [record for record in caplog.records if record.getMessage() == "Model fitted"]
        assert [record.trie_truncated for record in records] == [True, False]

    def test_timings_recorded(self, periodic_sample):
        result = fit_model(periodic_sample, EstimationConfig(), max_depth=3)
        assert set(result.timings) == {"count", "radii", "prune"}

    def test_unknown_order_and_frontier(self, periodic_sample):
        trie = build_count_trie(periodic_sample, max_depth=1)
        with pytest.raises(EstimationError):
            prune_tree(trie, constant_radii(trie, 0.2), EstimationConfig(), order="widest")
        with pytest.raises(EstimationError):
            fit_model(periodic_sample, EstimationConfig(), frontier="partial")

    @pytest.mark.parametrize("cfg", [
        EstimationConfig(c=0.3),
        EstimationConfig(c=1.01),
        EstimationConfig(c=0.5, restricted_candidates=True),
        EstimationConfig.for_dynamic_programming(c=0.4),
    ])
    def test_matches_bruteforce_characterization(self, order3_instances, cfg):
        for trie in order3_instances:
            radii = build_radius_table(trie, cfg.radius_config())
            pruned = prune_tree(trie, radii, cfg)
            assert pruned.shape.nodes == smallest_tree_bruteforce(trie, radii, cfg).nodes

    def test_examination_order_invariance(self, order3_instances):
        cfg = EstimationConfig(c=0.3)
        for trie in order3_instances:
            radii = build_radius_table(trie, cfg.radius_config())
            reference = prune_tree(trie, radii, cfg).shape.nodes
            for seed in range(5):
                shuffled = prune_tree(trie, radii, cfg, order="random", rng=np.random.default_rng(seed))
                assert shuffled.shape.nodes == reference

    def test_slack_monotonicity(self, order3_instances):
        for trie in order3_instances:
            shapes = []
            for c in (0.2, 0.4, 0.8, 1.01):
                cfg = EstimationConfig(c=c)
                radii = build_radius_table(trie, cfg.radius_config())
                shapes.append(prune_tree(trie, radii, cfg).shape)
            assert all(later.is_subtree_of(earlier) for earlier, later in zip(shapes, shapes[1:]))

    def test_every_survivor_has_a_witness(self, order3_instances):
        cfg = EstimationConfig(c=0.3)
        for trie in order3_instances:
            radii = build_radius_table(trie, cfg.radius_config())
            model = prune_tree(trie, radii, cfg)
            for v in model.shape.nodes:
                if v:
                    assert survivor_witness(v, trie, radii, cfg) is not None

    def test_tree_is_inside_visible_set(self, order3_instances):
        cfg = EstimationConfig(c=0.3)
        for trie in order3_instances:
            model = prune_tree(trie, build_radius_table(trie, cfg.radius_config()), cfg)
            assert model.shape.nodes <= set(trie.nodes)
            assert all(w[1:] in model.shape for w in model.shape.nodes if w)


def random_order2_trie(rng, max_depth=6):
    """Trie of a random order-2 population with 1 to 3 groups and 30 to 200 symbols."""
    groups = int(rng.integers(1, 4))
    n = int(rng.integers(30, 201))
    shape = TreeShape.full(2, 2)
    laws = {}
    for leaf in shape.leaves():
        ones = rng.uniform(0.05, 0.95, size=groups)
        laws[leaf] = np.column_stack([1.0 - ones, ones])
    sim = simulate(make_population_model(shape, laws, Alphabet.binary()), n, groups, rng)
    return build_count_trie(sim.sample, max_depth=max_depth)


def count_shaped_radii(trie, scale):
    return RadiusTable(
        {node.context: np.minimum(1.0, scale / np.sqrt(np.maximum(node.counts_ctx, 1))) for node in trie},
        trie.group_count,
    )


@pytest.mark.slow
@pytest.mark.statistical
class TestPruningCharacterizationAtScale:
    """Random populations, mixed settings and radius shapes"""

    CONFIGS = [
        EstimationConfig(c=0.3),
        EstimationConfig(c=1.01),
        EstimationConfig(c=0.5, restricted_candidates=True),
        EstimationConfig.for_dynamic_programming(c=0.4),
    ]

    def test_pruned_tree_is_smallest_tree_in_any_order(self):
        rng = np.random.default_rng(2024)
        nontrivial = 0
        for instance in range(500):
            trie = random_order2_trie(rng)
            cfg = self.CONFIGS[instance % len(self.CONFIGS)]
            shape = instance % 3
            if shape == 0:
                radii = build_radius_table(trie, cfg.radius_config())
            elif shape == 1:
                radii = constant_radii(trie, float(rng.uniform(0.01, 0.3)))
            else:
                radii = count_shaped_radii(trie, float(rng.uniform(0.3, 2.0)))

            expected = smallest_tree_bruteforce(trie, radii, cfg).nodes
            pruned = prune_tree(trie, radii, cfg)
            assert pruned.shape.nodes == expected, f"instance {instance}"
            for _ in range(10):
                shuffled = prune_tree(trie, radii, cfg, order="random", rng=rng)
                assert shuffled.shape.nodes == expected, f"instance {instance}"
            nontrivial += len(expected) > 1
        assert nontrivial >= 100


# ============================================================================
# Completion and prediction
# ============================================================================

@pytest.mark.unit
class TestCompletion:
    """Synthetic leaves copy their parent's data"""

    def test_adds_missing_sibling(self):
        model = make_model(
            [(), (0,), (1,), (0, 0)],
            {(0,): [[0.2, 0.8]], (1,): [[0.6, 0.4]], (0, 0): [[0.9, 0.1]]},
        )
        completed = complete_model(model)
        assert completed.completed
        assert completed.shape.is_complete()
        assert completed.synthetic == frozenset({(1, 0)})
        assert completed.distributions[(1, 0)].tolist() == [[0.2, 0.8]]
        assert completed.radii.get((1, 0)).tolist() == model.radii.get((0,)).tolist()

    def test_complete_tree_unchanged(self):
        model = make_model([(), (0,), (1,)], {(0,): [[0.2, 0.8]], (1,): [[0.6, 0.4]]})
        completed = complete_model(model)
        assert completed.shape.nodes == model.shape.nodes
        assert completed.synthetic == frozenset()

    def test_synthetic_leaf_count(self):
        model = make_model([(), (1,), (0, 1), (1, 1), (0, 1, 1)], {(): [[0.5, 0.5]]})
        missing = sum(
            model.alphabet.size - len(model.shape.children(w))
            for w in model.shape.nodes if model.shape.children(w)
        )
        assert len(complete_model(model).synthetic) == missing


@pytest.mark.unit
class TestPredict:
    """P_hat(.|x) = p_hat(.|T_hat(x))"""

    def test_root_only_model(self):
        model = make_model([()], {(): [[0.3, 0.7], [0.6, 0.4]]})
        assert predict(model, [1, 0, 1], 1).tolist() == [0.6, 0.4]
        assert predict(model, [], 0).tolist() == [0.3, 0.7]

    def test_same_terminal_same_prediction(self):
        model = make_model([(), (0,), (1,)], {(0,): [[0.2, 0.8]], (1,): [[0.6, 0.4]]})
        assert predict(model, [1, 1, 0], 0).tolist() == predict(model, [0, 0], 0).tolist()

    def test_insufficient_history_propagates(self):
        model = make_model([(), (0,), (1,)], {(0,): [[0.2, 0.8]], (1,): [[0.6, 0.4]]})
        with pytest.raises(InsufficientHistoryError):
            predict(model, [], 0)

    def test_group_out_of_range(self):
        model = make_model([()], {(): [[0.3, 0.7]]})
        with pytest.raises(EstimationError) as exc_info:
            predict(model, [0], 3)
        assert exc_info.value.error_code == ErrorCode.GROUP_OUT_OF_RANGE
