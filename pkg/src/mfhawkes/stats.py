"""Statistical helpers for the verification checks."""

from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "MIN_KS_SAMPLE",
    "two_sample_ks",
    "loglog_slope",
    "normality_test",
    "mean_and_se",
    "variance_and_se",
    "SlopeFit",
]

MIN_KS_SAMPLE = 50


def two_sample_ks(sample_a, sample_b):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size < MIN_KS_SAMPLE or b.size < MIN_KS_SAMPLE:
        raise ValueError(
            f"two-sample KS needs at least {MIN_KS_SAMPLE} points per sample "
            f"(got {a.size} and {b.size})"
        )
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples contain non-finite values")
    res = stats.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float

    def within(self, lo, hi):
        return lo <= self.slope <= hi


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("need at least two positive points")
    res = stats.linregress(np.log(x), np.log(y))
    return SlopeFit(float(res.slope), float(res.intercept), float(res.stderr))


def normality_test(sample, alpha=0.01):
    """Anderson-Darling test for normality; returns (statistic, critical, passed)."""
    res = stats.anderson(np.asarray(sample, dtype=float).ravel(), dist="norm")
    levels = np.asarray(res.significance_level) / 100.0
    j = int(np.argmin(np.abs(levels - alpha)))
    crit = float(res.critical_values[j])
    return float(res.statistic), crit, bool(res.statistic < crit)


def mean_and_se(x, axis=0):
    x = np.asarray(x, dtype=float)
    n = x.shape[axis]
    return x.mean(axis=axis), x.std(axis=axis, ddof=1) / np.sqrt(n)


def variance_and_se(x, axis=0):
    """Sample variance and its standard error from the fourth central moment."""
    x = np.asarray(x, dtype=float)
    n = x.shape[axis]
    c = x - x.mean(axis=axis, keepdims=True)
    var = np.sum(c ** 2, axis=axis) / (n - 1)
    m4 = np.mean(c ** 4, axis=axis)
    se = np.sqrt(np.maximum(m4 - var ** 2 * (n - 3) / (n - 1), 0.0) / n)
    return var, se
