"""
Monte Carlo model-selection study.

Every replication simulates a fresh sample from the truth, fits the tree and
records which tracked nodes were selected, how many selected nodes lie
outside the compatible tree, whether the Good event held and (when it did
and c > 1) any violation of the conditional guarantees.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.config.settings import settings
from src.core.alphabet import Alphabet, Context
from src.core.tree_shape import TreeShape
from src.models.estimation import EstimationConfig
from src.pruning.prune_tree import fit_model
from src.truth.oracle import OracleEvaluator, check_good, solve_oracle_tree
from src.truth.simulate import simulate
from src.truth.theorems import check_no_overestimation, check_oracle_inequality, check_radius_bound
from src.truth.true_models import TrueModel, make_depth1_population, make_order3_chain, make_renewal

logger = logging.getLogger(__name__)

RENEWAL_TRACKED_DEPTH = 8


class TruthKind(str, Enum):
    ORDER3 = "order3"
    RENEWAL = "renewal"
    DEPTH1_POPULATION = "depth1_population"


def build_truth(kind: TruthKind, group_count: int) -> TrueModel:
    if kind is TruthKind.ORDER3:
        return make_order3_chain()
    if kind is TruthKind.RENEWAL:
        return make_renewal()
    return make_depth1_population(group_count)


def default_tracked(kind: TruthKind) -> List[Context]:
    """Table rows: deepest nodes first, siblings together, root last."""
    if kind is TruthKind.ORDER3:
        nodes = TreeShape.full(3, 2).nodes
    elif kind is TruthKind.RENEWAL:
        nodes = {()}
        for j in range(RENEWAL_TRACKED_DEPTH):
            nodes.add((0,) * (j + 1))
            nodes.add((1,) + (0,) * j)
    else:
        nodes = TreeShape.full(1, 2).nodes
    return sorted(nodes, key=lambda w: (-len(w), w[1:], w[:1]))


class StudyConfig(BaseModel):
    """One cell of a selection table."""
    model_config = ConfigDict(frozen=True)

    truth: TruthKind = TruthKind.ORDER3
    n: int = Field(gt=0)
    groups: int = Field(default=1, ge=1)
    replications: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0)
    estimation: EstimationConfig = Field(default_factory=EstimationConfig)
    tracked: Optional[List[str]] = None
    max_depth: Optional[int] = Field(default=None, ge=1)
    threads: int = Field(default_factory=lambda: settings.default_threads, ge=1)
    check_theorems: bool = True
    oracle_depth: int = Field(default=3, ge=0)

    def tracked_contexts(self, alphabet: Alphabet) -> List[Context]:
        if self.tracked is None:
            return default_tracked(self.truth)
        return [alphabet.parse_context(text) for text in self.tracked]


class ReplicationResult(BaseModel):
    index: int
    seed: int
    selected: List[str]
    extra: int
    others: int
    tree_size: int
    height: int
    good: bool
    violations: Dict[str, int] = Field(default_factory=dict)
    l2_fallback: bool = False
    seconds: float = 0.0


class StudyReport(BaseModel):
    """Selection frequencies per tracked node plus the extra-node mean."""

    config: Dict[str, Any]
    tracked: List[str]
    frequencies: Dict[str, float]
    extra_mean: float
    others_mean: float
    good_frequency: float
    good: List[bool]
    theorem_violations: Dict[str, int]
    l2_fallback: bool
    replication_seconds: List[float]

    def rows(self) -> List[List[Any]]:
        """Table rows in tracked order followed by the 'others' and 'extra' rows."""
        rows = [[node, self.frequencies[node]] for node in self.tracked]
        rows.append(["others", self.others_mean])
        rows.append(["extra", self.extra_mean])
        return rows


def replication_seed(base: int, index: int) -> int:
    return base ^ index


def run_replication(cfg: StudyConfig, index: int) -> ReplicationResult:
    start = time.perf_counter()
    seed = replication_seed(cfg.seed, index)
    rng = np.random.default_rng(seed)
    truth = build_truth(cfg.truth, cfg.groups)
    sim = simulate(truth, cfg.n, cfg.groups, rng)
    est = cfg.estimation

    fit = fit_model(
        sim.sample,
        est,
        max_depth=cfg.max_depth,
        frontier="good",
        position_values=sim.conditionals
    )
    model = fit.model
    alphabet = sim.alphabet
    tracked = cfg.tracked_contexts(alphabet)
    tracked_set = set(tracked)

    selected = [alphabet.format(w) for w in tracked if w in model.shape]
    extra = sum(1 for w in model.shape.nodes if not truth.contains(w))
    others = sum(1 for w in model.shape.nodes if truth.contains(w) and w not in tracked_set)

    evaluator = OracleEvaluator(sim, est)
    good = check_good(sim, fit.trie, fit.radii, est.m, est.fam, evaluator)

    violations: Dict[str, int] = {}
    if cfg.check_theorems and good and est.c > 1.0:
        found = list(check_no_overestimation(model, truth))
        oracle_tree = solve_oracle_tree(sim, est, cfg.oracle_depth, evaluator=evaluator)
        found += check_radius_bound(model, oracle_tree, evaluator)
        found += check_oracle_inequality(model, oracle_tree, evaluator)
        for item in found:
            violations[item["check"]] = violations.get(item["check"], 0) + 1
        if found:
            logger.warning(
                "Conditional guarantee violated",
                extra={"replication": index, "seed": seed, "violations": violations}
            )

    seconds = time.perf_counter() - start
    logger.debug(
        "Replication finished",
        extra={"replication": index, "tree_nodes": len(model.shape), "good": good, "seconds": seconds}
    )
    return ReplicationResult(
        index=index,
        seed=seed,
        selected=selected,
        extra=extra,
        others=others,
        tree_size=len(model.shape),
        height=model.height,
        good=good,
        violations=violations,
        l2_fallback=fit.radii.l2_fallback,
        seconds=seconds,
    )


def _run_all(cfg: StudyConfig) -> List[ReplicationResult]:
    if cfg.threads <= 1 or cfg.replications == 1:
        return [run_replication(cfg, index) for index in range(cfg.replications)]
    results = []
    with ProcessPoolExecutor(max_workers=cfg.threads) as executor:
        futures = {executor.submit(run_replication, cfg, index): index for index in range(cfg.replications)}
        for future in as_completed(futures):
            results.append(future.result())
    return sorted(results, key=lambda result: result.index)


def aggregate(cfg: StudyConfig, results: List[ReplicationResult]) -> StudyReport:
    alphabet = build_truth(cfg.truth, cfg.groups).alphabet
    tracked = [alphabet.format(w) for w in cfg.tracked_contexts(alphabet)]
    count = len(results)
    frequencies = {
        node: sum(1 for result in results if node in result.selected) / count
        for node in tracked
    }
    violations: Dict[str, int] = {}
    for result in results:
        for check, hits in result.violations.items():
            violations[check] = violations.get(check, 0) + hits
    return StudyReport(
        config=cfg.model_dump(mode="json"),
        tracked=tracked,
        frequencies=frequencies,
        extra_mean=sum(result.extra for result in results) / count,
        others_mean=sum(result.others for result in results) / count,
        good_frequency=sum(result.good for result in results) / count,
        good=[result.good for result in results],
        theorem_violations=violations,
        l2_fallback=any(result.l2_fallback for result in results),
        replication_seconds=[result.seconds for result in results],
    )


def run_study(cfg: StudyConfig) -> StudyReport:
    """Run every replication (in worker processes when threads > 1) and aggregate."""
    logger.info(
        "Study started",
        extra={
            "truth": cfg.truth.value,
            "n": cfg.n,
            "groups": cfg.groups,
            "replications": cfg.replications,
            "c": cfg.estimation.c,
            "threads": cfg.threads,
        }
    )
    results = _run_all(cfg)
    report = aggregate(cfg, results)
    logger.info(
        "Study finished",
        extra={
            "extra_mean": report.extra_mean,
            "good_frequency": report.good_frequency,
            "violations": report.theorem_violations,
        }
    )
    return report
