"""
Martingale tail bounds behind the radii, exposed for empirical sanity checks.

For a martingale M_n with increments bounded by Y and predictable quadratic
variation V_n, P(M_n >= lam, 0 < V_n <= v) <= exp(-lam^2 / (2 v)); a refined
form multiplies the exponent by (2 - exp(lam / v)).
"""

import math
from typing import Tuple

import numpy as np
from numpy.typing import NDArray


def martingale_tail_bound(lam: float, v: float) -> float:
    return math.exp(-lam ** 2 / (2.0 * v))


def martingale_tail_bound_refined(lam: float, v: float) -> float:
    """Valid for increments bounded by 1; informative when lam < v log 2."""
    return math.exp(-(lam ** 2 / (2.0 * v)) * (2.0 - math.exp(lam / v)))


def h_threshold(x: float, gamma: float, delta: float) -> float:
    """h(x) = 2 x gamma^2 log{(2/delta)(1 + log_gamma x)(2 + log_gamma x)} for x >= 1."""
    level = math.log(x) / math.log(gamma)
    return 2.0 * x * gamma ** 2 * math.log((2.0 / delta) * (1.0 + level) * (2.0 + level))


def simulate_bounded_martingale(
    n: int, trials: int, rng: np.random.Generator
) -> Tuple[NDArray[np.float64], float]:
    """
    Final values of i.i.d. +-1/2 increment martingales.

    Returns:
        (M_n for each trial, V_n) where V_n = n/4 is deterministic
    """
    ups = rng.binomial(n, 0.5, size=trials)
    final = ups - 0.5 * n
    return final.astype(np.float64), n / 4.0


def exceedance_frequency(final: NDArray[np.float64], lam: float) -> float:
    return float(np.mean(final >= lam))
