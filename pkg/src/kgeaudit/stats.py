"""Spearman rank correlation with tie-corrected average ranks.

rho is the Pearson correlation of the two rank vectors, with tied values
assigned the mean of the positions they span. The p-value uses the two-sided
Student-t approximation t = rho * sqrt((n - 2) / (1 - rho^2)) with n - 2
degrees of freedom; it needs n >= 3 and is exact 0 when |rho| = 1. A constant
input vector leaves rho undefined and the result is flagged degenerate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import stdtr


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    p_value: float
    n: int
    degenerate: bool = False


def average_ranks(values) -> np.ndarray:
    """Ranks 1..n with ties sharing the average of their positions."""
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    order = np.argsort(values, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> SpearmanResult:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-d arrays of equal length")
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 observations, got {n}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("inputs must be finite")
    if np.all(x == x[0]) or np.all(y == y[0]):
        return SpearmanResult(rho=math.nan, p_value=math.nan, n=n, degenerate=True)

    rx = average_ranks(x)
    ry = average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    rho = float((dx * dy).sum() / math.sqrt((dx * dx).sum() * (dy * dy).sum()))
    rho = max(-1.0, min(1.0, rho))

    if n < 3:
        p = math.nan
    elif abs(rho) == 1.0:
        p = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = 2.0 * float(stdtr(n - 2, -abs(t)))
    return SpearmanResult(rho=rho, p_value=p, n=n)
