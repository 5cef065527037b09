"""Sample estimators shared by the exposure and funding-loss reports.

Quantiles use the lower order statistic: the value at index
``ceil(alpha * n) - 1`` of the ascending sort, i.e. the smallest sample
``x`` with ``#{samples <= x} >= alpha * n``. Sums are exactly rounded
(``math.fsum``) so results do not depend on summation order.
"""

from __future__ import annotations

import math

import numpy as np


def _check_level(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {alpha}")


def order_index(alpha: float, n: int) -> int:
    _check_level(alpha)
    return max(math.ceil(alpha * n) - 1, 0)


def mean(samples) -> float:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    return math.fsum(x.tolist()) / x.size


def standard_error(samples) -> float:
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    if n == 1:
        return 0.0
    m = mean(x)
    var = math.fsum(((x - m) ** 2).tolist()) / (n - 1)
    return math.sqrt(var / n)


def quantile(samples, alpha: float) -> float:
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("empty sample")
    return float(x[order_index(alpha, x.size)])


def tail_expectation(samples, alpha: float) -> float:
    """Mean of the sorted samples from the alpha order statistic upward."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("empty sample")
    tail = x[order_index(alpha, x.size) :]
    return math.fsum(tail.tolist()) / tail.size


def column_quantiles(matrix, alpha: float) -> np.ndarray:
    """Per-column lower order statistic of a (samples x columns) matrix."""
    m = np.sort(np.asarray(matrix, dtype=float), axis=0)
    return m[order_index(alpha, m.shape[0])]
