"""
Data-driven confidence radii conf_l(w).

All logarithms are natural and ``n`` is the largest group length. Radii are
computed for all groups of a node at once; the per-(w, l) functions below are
thin wrappers used by callers that need a single value.

Modes:
    INF      uniform sup-event radius, epsilon = delta / (n^2 |S| L)
    L2       averaged-event radius, valid when alpha < 3; otherwise INF is used
    INF_VAR  INF radius scaled by the variance factor sigma_tilde
    L2_VAR   L2 radius scaled by the variance factor sigma_tilde
    PRECISE  two-branch radius on a geometric grid with base gamma
"""

import logging
import math
from enum import Enum
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field

from src.config.exceptions import ErrorCode, RadiusFallback, estimation_error
from src.core.alphabet import Context
from src.core.distances import SetFamily
from src.counting.count_trie import CountTrie, TrieNode

logger = logging.getLogger(__name__)

MIN_SAMPLE_SIZE = 9
LOG_THREE_HALVES_SQ = math.log(1.5) ** 2


class RadiusMode(str, Enum):
    INF = "INF"
    L2 = "L2"
    INF_VAR = "INF_VAR"
    L2_VAR = "L2_VAR"
    PRECISE = "PRECISE"


class RadiusConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: RadiusMode = RadiusMode.INF
    delta: float = Field(default=0.05, gt=0.0, lt=1.0, description="Confidence parameter")
    gamma: float = Field(default=2.0, gt=1.0, description="Geometric grid base for PRECISE radii")
    fam: SetFamily = SetFamily.SINGLETONS


# ============================================================================
# Closed-form ingredients
# ============================================================================

def base_radius(count: float, epsilon: float) -> float:
    """c(N, eps) = 2 sqrt(1/N) sqrt(log(1/eps) + 2 log(2 + 2 log N))."""
    if count < 1:
        raise estimation_error(
            "base_radius needs a positive count",
            ErrorCode.RADIUS_INPUT_INVALID,
            count=count
        )
    if not 0.0 < epsilon < 1.0:
        raise estimation_error(
            "base_radius needs epsilon in (0, 1)",
            ErrorCode.RADIUS_INPUT_INVALID,
            epsilon=epsilon
        )
    return float(_base_radius_array(np.array([count], dtype=np.float64), epsilon)[0])


def _base_radius_array(counts: NDArray[np.float64], epsilon: float) -> NDArray[np.float64]:
    counts = np.maximum(counts, 1.0)
    return 2.0 * np.sqrt(1.0 / counts) * np.sqrt(
        math.log(1.0 / epsilon) + 2.0 * np.log(2.0 + 2.0 * np.log(counts))
    )


def inf_epsilon(n: int, group_count: int, family_size: int, delta: float) -> float:
    return delta / (float(n) ** 2 * family_size * group_count)


def _require_sample_size(n: int, mode: RadiusMode) -> None:
    if n < MIN_SAMPLE_SIZE:
        raise estimation_error(
            f"{mode.value} radii need n >= {MIN_SAMPLE_SIZE}",
            ErrorCode.RADIUS_INPUT_INVALID,
            n=n
        )


def l2_alpha(n: int, group_count: int, delta: float) -> float:
    """alpha = log^2(n^2 L / delta) / (L log log n)."""
    log_term = math.log(float(n) ** 2 * group_count / delta)
    return log_term ** 2 / (group_count * math.log(math.log(n)))


def l2_epsilon(n: int, group_count: int, family_size: int, delta: float) -> float:
    log_term = math.log(float(n) ** 2 * group_count / delta)
    return math.log(math.log(n)) / (4.0 * family_size * log_term ** 2)


def l2_inflation(n: int, group_count: int, delta: float) -> float:
    alpha = l2_alpha(n, group_count, delta)
    return math.sqrt((1.0 + 1.5 * alpha) * (1.0 + 1.0 / math.log(n)))


def precise_confidence_level(n: int, group_count: int, delta: float, family_size: int) -> float:
    """delta_c = mu / (2 (1 + mu) M |S|) with mu = 1/log n, M = log(n^2 L/delta) / log log n."""
    mu = 1.0 / math.log(n)
    grid = math.log(float(n) ** 2 * group_count / delta) / math.log(math.log(n))
    return mu / (2.0 * (1.0 + mu) * grid * family_size)


def smallest_i0(gamma: float, delta_c: float, limit: int = 10_000) -> int:
    """Smallest integer i with gamma^i log^2(2 - 1/gamma) >= 2 log(2/delta_c) + 2 log((1+i)(2+i))."""
    scale = math.log(2.0 - 1.0 / gamma) ** 2
    target = 2.0 * math.log(2.0 / delta_c)
    for i in range(limit):
        if i * math.log(gamma) + math.log(scale) >= math.log(target + 2.0 * math.log((1 + i) * (2 + i))):
            return i
    raise estimation_error(
        "No grid index satisfies the threshold inequality",
        ErrorCode.RADIUS_INPUT_INVALID,
        gamma=gamma,
        delta_c=delta_c
    )


def sigma_hat_from(probs: ArrayLike, fam: SetFamily, inflation: float) -> float:
    """
    Upper-confidence plug-in for the maximal set variance.

    Each p_hat(S) is moved toward 1/2 by ``inflation`` (never past it) before
    taking max_S q(S)(1 - q(S)); the result is at most 1/2.
    """
    p = np.asarray(probs, dtype=np.float64)
    if fam is SetFamily.SINGLETONS:
        set_probs = p
    else:
        set_probs = _subset_matrix(p.size)[1:-1] @ p
    clamped = np.where(
        set_probs < 0.5,
        np.minimum(set_probs + inflation, 0.5),
        np.maximum(set_probs - inflation, 0.5)
    )
    variance = float(np.max(clamped * (1.0 - clamped)))
    return math.sqrt(min(0.25, variance))


_SUBSET_CACHE = {}


def _subset_matrix(alphabet_size: int) -> NDArray[np.float64]:
    """Indicator matrix of all subsets in bitmask order, shape (2^|A|, |A|)."""
    if alphabet_size not in _SUBSET_CACHE:
        masks = np.arange(2 ** alphabet_size)[:, None]
        bits = (masks >> np.arange(alphabet_size)[None, :]) & 1
        _SUBSET_CACHE[alphabet_size] = bits.astype(np.float64)
    return _SUBSET_CACHE[alphabet_size]


# ============================================================================
# Vectorized calculator
# ============================================================================

class RadiusCalculator:
    """
    Per-node radius vectors for a fixed (n, L, |A|) and configuration.

    Radii returned by :meth:`node_radii` are capped at 1 but not yet
    monotonized along suffix extension; invisible nodes get radius 1.
    """

    def __init__(self, n: int, group_count: int, alphabet_size: int, cfg: RadiusConfig):
        self.n = n
        self.group_count = group_count
        self.alphabet_size = alphabet_size
        self.cfg = cfg
        self.family_size = cfg.fam.cardinality(alphabet_size)
        self.l2_fallback = False
        self.alpha: Optional[float] = None

        self.inf_eps = inf_epsilon(n, group_count, self.family_size, cfg.delta)
        self.base_mode = RadiusMode.INF
        if cfg.mode in (RadiusMode.L2, RadiusMode.L2_VAR, RadiusMode.PRECISE):
            _require_sample_size(n, cfg.mode)
        if cfg.mode in (RadiusMode.L2, RadiusMode.L2_VAR):
            self.alpha = l2_alpha(n, group_count, cfg.delta)
            try:
                self._check_l2()
                self.base_mode = RadiusMode.L2
                self.l2_eps = l2_epsilon(n, group_count, self.family_size, cfg.delta)
                self.l2_factor = l2_inflation(n, group_count, cfg.delta)
            except RadiusFallback as fallback:
                self.l2_fallback = True
                logger.warning(
                    "L2 radius hypothesis fails; using INF radii",
                    extra={"alpha": fallback.alpha, "n": n, "groups": group_count}
                )

        # sample-size event threshold constant: 2 log(n^2 |S| / delta)
        self.j_log = 2.0 * math.log(float(n) ** 2 * self.family_size / cfg.delta)

        if cfg.mode is RadiusMode.PRECISE:
            self.delta_c = precise_confidence_level(n, group_count, cfg.delta, self.family_size)
            self.i0 = smallest_i0(cfg.gamma, self.delta_c)
            self.threshold = cfg.gamma ** self.i0
            self.precise_log = math.log(
                4.0 * self.family_size * math.log(n) * math.log(float(n) ** 2 * group_count / cfg.delta)
                / math.log(math.log(n))
            )

    def _check_l2(self) -> None:
        if self.alpha is not None and self.alpha >= 3.0:
            raise RadiusFallback(self.alpha)

    # -- per-mode vector formulas (counts: N_{n-1,l}(w) per group, all >= 1) --

    def inf_raw(self, counts: NDArray[np.float64]) -> NDArray[np.float64]:
        return _base_radius_array(counts, self.inf_eps)

    def l2_raw(self, counts: NDArray[np.float64]) -> NDArray[np.float64]:
        return _base_radius_array(counts, self.l2_eps) * self.l2_factor

    def base_raw(self, counts: NDArray[np.float64]) -> NDArray[np.float64]:
        if self.base_mode is RadiusMode.L2:
            return self.l2_raw(counts)
        return self.inf_raw(counts)

    def sigma_hats(self, probs: NDArray[np.float64], conf_i: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.array([
            sigma_hat_from(probs[g], self.cfg.fam, float(conf_i[g]))
            for g in range(probs.shape[0])
        ])

    def j_event(self, counts: NDArray[np.float64], sigmas: NDArray[np.float64]) -> NDArray[np.bool_]:
        variance_mass = sigmas ** 2 * counts
        holds = np.zeros(counts.shape, dtype=bool)
        ok = variance_mass > 1.0
        if np.any(ok):
            required = (
                self.j_log + 4.0 * np.log(2.0 + 2.0 * np.log(variance_mass[ok]))
            ) / (sigmas[ok] ** 2 * LOG_THREE_HALVES_SQ)
            holds[ok] = counts[ok] >= required
        return holds

    def variance_raw(self, counts: NDArray[np.float64], probs: NDArray[np.float64]) -> NDArray[np.float64]:
        conf_i = self.base_raw(counts)
        sigmas = self.sigma_hats(probs, np.minimum(conf_i, 1.0))
        factor = np.where(self.j_event(counts, sigmas), math.sqrt(2.0) * sigmas, 1.0)
        return factor * conf_i

    def precise_raw(self, counts: NDArray[np.float64], probs: NDArray[np.float64]) -> NDArray[np.float64]:
        gamma = self.cfg.gamma
        conf_i = np.minimum(self.inf_raw(counts), 1.0)
        sigmas = self.sigma_hats(probs, conf_i)
        variance_mass = sigmas ** 2 * counts
        log_gamma = math.log(gamma)
        out = np.empty(counts.shape, dtype=np.float64)
        upper = variance_mass >= self.threshold
        if np.any(upper):
            vm = variance_mass[upper]
            out[upper] = gamma * np.sqrt(2.0 * sigmas[upper] ** 2 / counts[upper]) * np.sqrt(
                self.precise_log + 2.0 * np.log(2.0 + np.log(vm) / log_gamma)
            )
        lower = ~upper
        if np.any(lower):
            cl = counts[lower]
            out[lower] = np.sqrt(2.0 * gamma / cl) * np.sqrt(
                self.precise_log + 2.0 * np.log(2.0 + np.log(cl) / log_gamma)
            )
        return out

    def raw_radii(self, counts: NDArray[np.float64], probs: NDArray[np.float64]) -> NDArray[np.float64]:
        mode = self.cfg.mode
        if mode in (RadiusMode.INF, RadiusMode.L2):
            raw = self.base_raw(counts)
        elif mode in (RadiusMode.INF_VAR, RadiusMode.L2_VAR):
            raw = self.variance_raw(counts, probs)
        else:
            raw = self.precise_raw(counts, probs)
        return np.minimum(raw, 1.0)

    def node_radii(self, node: Optional[TrieNode]) -> NDArray[np.float64]:
        if node is None or not node.visible:
            return np.ones(self.group_count)
        return self.raw_radii(node.counts_ctx.astype(np.float64), node.probabilities())


def calculator_for(trie: CountTrie, cfg: RadiusConfig) -> RadiusCalculator:
    return RadiusCalculator(trie.n, trie.group_count, trie.alphabet.size, cfg)


# ============================================================================
# Per-node, per-group operations
# ============================================================================

def _visible_node(trie: CountTrie, w: Context) -> Optional[TrieNode]:
    node = trie.get(w)
    if node is None or not node.visible:
        return None
    return node


def radius_inf(trie: CountTrie, w: Context, group: int, cfg: RadiusConfig) -> float:
    node = _visible_node(trie, w)
    if node is None:
        return 1.0
    calc = RadiusCalculator(trie.n, trie.group_count, trie.alphabet.size, cfg.model_copy(update={"mode": RadiusMode.INF}))
    return float(min(calc.inf_raw(node.counts_ctx[group:group + 1].astype(np.float64))[0], 1.0))


def radius_l2(trie: CountTrie, w: Context, group: int, cfg: RadiusConfig) -> float:
    """Raises RadiusFallback when alpha >= 3."""
    _require_sample_size(trie.n, RadiusMode.L2)
    alpha = l2_alpha(trie.n, trie.group_count, cfg.delta)
    if alpha >= 3.0:
        raise RadiusFallback(alpha)
    node = _visible_node(trie, w)
    if node is None:
        return 1.0
    family_size = cfg.fam.cardinality(trie.alphabet.size)
    eps = l2_epsilon(trie.n, trie.group_count, family_size, cfg.delta)
    count = float(node.counts_ctx[group])
    value = base_radius(count, eps) * l2_inflation(trie.n, trie.group_count, cfg.delta)
    return min(value, 1.0)


def sigma_hat(trie: CountTrie, w: Context, group: int, fam: SetFamily, inflation: float) -> float:
    node = _visible_node(trie, w)
    if node is None:
        raise estimation_error(
            "sigma_hat needs a visible node",
            ErrorCode.NODE_NOT_VISIBLE,
            context=list(w)
        )
    return sigma_hat_from(node.probabilities()[group], fam, inflation)


def radius_var(trie: CountTrie, w: Context, group: int, cfg: RadiusConfig) -> float:
    """Variance-improved radius over the INF (or L2 for L2_VAR) base radius."""
    node = _visible_node(trie, w)
    if node is None:
        return 1.0
    mode = cfg.mode if cfg.mode in (RadiusMode.INF_VAR, RadiusMode.L2_VAR) else RadiusMode.INF_VAR
    calc = RadiusCalculator(trie.n, trie.group_count, trie.alphabet.size, cfg.model_copy(update={"mode": mode}))
    radii = calc.raw_radii(node.counts_ctx.astype(np.float64), node.probabilities())
    return float(radii[group])


def radius_precise(trie: CountTrie, w: Context, group: int, cfg: RadiusConfig) -> float:
    node = _visible_node(trie, w)
    if node is None:
        return 1.0
    calc = RadiusCalculator(trie.n, trie.group_count, trie.alphabet.size, cfg.model_copy(update={"mode": RadiusMode.PRECISE}))
    radii = calc.raw_radii(node.counts_ctx.astype(np.float64), node.probabilities())
    return float(radii[group])
