"""Small statistics helpers: exact-normal KS distance, two-sample KS,
bootstrap confidence intervals, tail regressions."""

from __future__ import annotations

import math

import numpy as np


def normal_cdf(x: np.ndarray) -> np.ndarray:
    """Standard normal CDF via erf (double-precision accurate)."""
    x = np.asarray(x, dtype=float)
    return 0.5 * (1.0 + np.vectorize(math.erf)(x / math.sqrt(2.0)))


def ks_distance_normal(samples: np.ndarray) -> float:
    """Kolmogorov distance between the empirical CDF and N(0, 1)."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    cdf = normal_cdf(x)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb).max())


def bootstrap_ci(values: np.ndarray, seed, level: float = 0.95,
                 resamples: int = 2000) -> tuple[float, float]:
    """Percentile bootstrap CI for the mean.

    `seed` is a SeedSpec (or anything with .generator()).
    """
    g = seed.generator() if hasattr(seed, "generator") else \
        np.random.default_rng(seed)
    values = np.asarray(values, dtype=float)
    n = values.size
    idx = g.integers(0, n, size=(resamples, n))
    means = values[idx].mean(axis=1)
    q = 0.5 * (1.0 - level)
    return float(np.quantile(means, q)), float(np.quantile(means, 1.0 - q))


def loglog_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and intercept of log y against log x."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def weighted_line_fit(x: np.ndarray, y: np.ndarray,
                      w: np.ndarray) -> tuple[float, float]:
    """Inverse-variance weighted least squares for y = a x + b."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = np.asarray(w, float)
    xm = np.average(x, weights=w)
    ym = np.average(y, weights=w)
    a = float(np.sum(w * (x - xm) * (y - ym)) / np.sum(w * (x - xm) ** 2))
    return a, float(ym - a * xm)
