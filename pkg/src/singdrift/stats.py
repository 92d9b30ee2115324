"""Statistical machinery for the verification suite.

Deterministic given the samples (no internal randomness).  The KS
p-value uses the asymptotic Kolmogorov distribution, adequate for the
sample sizes the suite runs at (n >= 1e3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import kolmogorov, ndtri


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n: int
    passed: bool


def ks_test(sample, cdf, alpha: float = 0.01) -> TestResult:
    """One-sample Kolmogorov-Smirnov test against a continuous cdf."""
    sample = np.sort(np.asarray(sample, dtype=np.float64))
    n = sample.size
    if n == 0:
        raise ValueError("empty sample")
    f = np.asarray(cdf(sample), dtype=np.float64)
    grid = np.arange(1, n + 1) / n
    d_plus = np.max(grid - f)
    d_minus = np.max(f - (grid - 1.0 / n))
    d = max(float(d_plus), float(d_minus))
    p = float(kolmogorov(np.sqrt(n) * d))
    return TestResult(statistic=d, p_value=p, n=n, passed=p > alpha)


def mean_ci(samples, level: float = 0.99):
    """Sample mean and normal-approximation half-width at the given level."""
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.size
    if n < 2:
        raise ValueError("need at least two samples")
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must be in (0, 1)")
    m = float(np.mean(samples))
    z = ndtri(0.5 * (1.0 + level))
    half = float(z * np.std(samples, ddof=1) / np.sqrt(n))
    return m, half


@dataclass(frozen=True)
class BinStat:
    center: float
    mean: float
    count: int
    usable: bool


def binned_conditional_mean(xs, ys, edges, min_count: int = 500):
    """Per-bin mean of ys for xs falling in [edges[i], edges[i+1]).

    Bins with fewer than ``min_count`` points are flagged unusable and
    must stay out of any pass/fail decision.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.float64)
    if xs.shape != ys.shape:
        raise ValueError("xs and ys must be aligned")
    if np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be increasing")
    idx = np.digitize(xs, edges) - 1
    out = []
    for i in range(edges.size - 1):
        mask = idx == i
        count = int(np.sum(mask))
        center = 0.5 * (edges[i] + edges[i + 1])
        mean = float(np.mean(ys[mask])) if count else float("nan")
        out.append(BinStat(float(center), mean, count, count >= min_count))
    return out
