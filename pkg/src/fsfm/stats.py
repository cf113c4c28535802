"""Statistics for the benchmark harness.

Welch's unequal-variance t-test is implemented directly (statistic,
Welch-Satterthwaite degrees of freedom, and a two-tailed p-value from the
t-distribution survival function via the regularized incomplete beta
function) so its outputs can be pinned against an independent reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateSamplesError

_BETACF_MAX_ITER = 300
_BETACF_EPS = 1e-15


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    return h


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # Use the continued fraction on whichever side converges fast.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """Survival function P(T > t) of the t-distribution with df degrees of freedom."""
    if df <= 0:
        raise ValueError(f"degrees of freedom must be > 0, got {df}")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    x = df / (df + t * t)
    tail = 0.5 * betainc_regularized(df / 2.0, 0.5, x)
    return tail if t >= 0 else 1.0 - tail


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    p_value: float
    df: float


def welch_t_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> TTestResult:
    """Welch's two-tailed unequal-variance t-test.

    Raises DegenerateSamplesError when either sample has fewer than two
    observations or when both samples have zero variance.
    """
    na, nb = len(sample_a), len(sample_b)
    if na < 2 or nb < 2:
        raise DegenerateSamplesError(f"need >= 2 observations per sample, got {na} and {nb}")
    mean_a = math.fsum(sample_a) / na
    mean_b = math.fsum(sample_b) / nb
    var_a = math.fsum((x - mean_a) ** 2 for x in sample_a) / (na - 1)
    var_b = math.fsum((x - mean_b) ** 2 for x in sample_b) / (nb - 1)
    if var_a == 0.0 and var_b == 0.0:
        raise DegenerateSamplesError("both samples have zero variance")

    se_a, se_b = var_a / na, var_b / nb
    statistic = (mean_a - mean_b) / math.sqrt(se_a + se_b)
    df = (se_a + se_b) ** 2 / (se_a**2 / (na - 1) + se_b**2 / (nb - 1))
    p_value = 2.0 * student_t_sf(abs(statistic), df)
    return TTestResult(statistic=statistic, p_value=min(1.0, p_value), df=df)


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std: float
    minimum: float
    maximum: float
    p95: float


def summarize(values: Sequence[float]) -> SummaryStats:
    """Mean, sample std (0 for a single value), min, max, and 95th percentile."""
    if not values:
        raise ValueError("cannot summarize an empty sequence")
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return SummaryStats(
        mean=float(arr.mean()),
        std=std,
        minimum=float(arr.min()),
        maximum=float(arr.max()),
        p95=float(np.percentile(arr, 95)),
    )
