"""Paired significance testing across topics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc


class ZeroVarianceError(ValueError):
    """All paired differences are identical; the t statistic is undefined."""


@dataclass(frozen=True)
class PairedTestResult:
    t_statistic: float
    degrees_of_freedom: int
    p_value: float  # two-tailed
    mean_difference: float


def paired_t_test(a, b) -> PairedTestResult:
    """Two-tailed paired t-test.

    t = mean(d) / (sd(d) / sqrt(n)) with sample sd (n-1 divisor); the p-value
    comes from the regularized incomplete beta form of the Student-t CDF,
    p = I_{df/(df+t^2)}(df/2, 1/2).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be equal-length 1-d sequences")
    n = len(a)
    if n < 2:
        raise ValueError("need at least 2 pairs")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        raise ZeroVarianceError("all paired differences are identical")
    t = mean / (sd / np.sqrt(n))
    df = n - 1
    x = df / (df + t * t)
    p = float(betainc(df / 2.0, 0.5, x))
    return PairedTestResult(float(t), df, min(max(p, 0.0), 1.0), mean)
