"""Point estimates with standard errors."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    count: int
    method: str
    p_value: float | None = None  # one-sided, H0: true value <= 0

    def __post_init__(self) -> None:
        if self.stderr < 0 or not self.count >= 1:
            raise ValueError("need stderr >= 0 and count >= 1")

    def z(self, target: float) -> float:
        """(value - target) / stderr, with the 0/0 case mapped to 0."""
        diff = self.value - target
        if self.stderr == 0.0:
            return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        return diff / self.stderr

    def within(self, target: float, nsigma: float) -> bool:
        return abs(self.z(target)) <= nsigma


def mean_estimate(x, method: str = "mean") -> Estimate:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample")
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return Estimate(float(x.mean()), se, int(x.size), method)


def ratio_estimate(num, den, method: str = "ratio") -> Estimate:
    """mean(num) / mean(den) with a delta-method standard error."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = num.size
    if n == 0 or den.size != n:
        raise ValueError("need equally sized nonempty samples")
    mden = den.mean()
    r = num.mean() / mden
    if n > 1:
        resid = num - r * den
        se = float(math.sqrt(resid.var(ddof=1) / n) / abs(mden))
    else:
        se = 0.0
    return Estimate(float(r), se, n, method)


def batch_means(x, min_batches: int = 20) -> tuple[float, float, int]:
    """Mean and batch-means standard error of a correlated series.

    Batch size is floor(sqrt(n)); at least ``min_batches`` batches are
    required.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    b = int(math.isqrt(n))
    a = n // b if b else 0
    if a < min_batches:
        raise ValueError(f"series of length {n} gives fewer than {min_batches} batches")
    means = x[: a * b].reshape(a, b).mean(axis=1)
    var = b * float(((means - means.mean()) ** 2).sum()) / (a - 1)
    return float(x.mean()), math.sqrt(var / n), a


def combine(estimates: Sequence[Estimate], method: str | None = None) -> Estimate:
    """Equal-weight average of independent estimates."""
    if not estimates:
        raise ValueError("nothing to combine")
    r = len(estimates)
    value = sum(e.value for e in estimates) / r
    se = math.sqrt(sum(e.stderr**2 for e in estimates)) / r
    return Estimate(value, se, sum(e.count for e in estimates), method or estimates[0].method)


def one_sided_p(value: float, stderr: float) -> float:
    """P-value of H0: mean <= 0 under a normal approximation."""
    if stderr == 0.0:
        return 0.0 if value > 0 else 1.0
    return float(sps.norm.sf(value / stderr))


def wilson(count: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = sps.binomtest(int(count), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def two_proportion_z(c1: int, n1: int, c2: int, n2: int) -> float:
    """Pooled z statistic for p1 - p2; 0 when both samples are degenerate alike."""
    p = (c1 + c2) / (n1 + n2)
    se = math.sqrt(p * (1 - p) * (1 / n1 + 1 / n2))
    diff = c1 / n1 - c2 / n2
    if se == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / se
