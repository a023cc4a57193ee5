"""Closed-form quantities behind the monotonicity argument.

Every function here is pure. The effective bias of the integer walk is
``d * beta`` where ``d`` is the minimal offspring degree (``d = 1`` unless
stated otherwise).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np
from scipy.optimize import bisect

from .offspring import OffspringDistribution, expected_epsilon

Variant = Literal["paper", "direct"]

# Closed-form tail constant behind C_paper, and the leading asymptote of beta*C(beta).
PAPER_SERIES_FACTOR = 15.0
ASYMPTOTIC_BETA_C = 15.0 * (27.0 / 4.0) ** 2


class DivergentBound(ValueError):
    """Raised when the geometric tail base 27 q_1 / 4 is >= 1."""


def pqeps(i: int, beta: float, eps: float = 0.0) -> tuple[float, float, float]:
    """Forward, backward and decoupling probabilities at a vertex with i children.

    Returns ``(p_i, q_i, eps_i)`` with ``p_i = beta/(i beta + 1)``,
    ``q_i = 1/(i beta + 1)`` and ``eps_i = q_i(beta) - q_i(beta + eps)``.
    """
    if i < 1:
        raise ValueError("vertex must have at least one child")
    if not beta > 0 or eps < 0:
        raise ValueError("need beta > 0 and eps >= 0")
    denom = i * beta + 1.0
    e = i * eps / (denom * (i * (beta + eps) + 1.0))
    return beta / denom, 1.0 / denom, e


def _effective(beta: float, d: int) -> float:
    if d < 1:
        raise ValueError("minimal degree must be >= 1")
    b = d * beta
    if b < 1.0:
        raise ValueError(f"requires d*beta >= 1, got {b}")
    return b


def p_inf(beta: float, d: int = 1) -> float:
    """The regeneration constant used in the bounds: (b/(b+1)) (b-1)/(b+1), b = d beta.

    This is the closed form as it enters C(beta). It is smaller than the
    probability that the integer walk never returns to its start by the
    factor b/(b+1); see :func:`escape_probability`.
    """
    b = _effective(beta, d)
    return (b / (b + 1.0)) * ((b - 1.0) / (b + 1.0))


def escape_probability(beta: float, d: int = 1) -> float:
    """P[a b-biased walk on the integers never returns to 0] = (b-1)/(b+1)."""
    b = _effective(beta, d)
    return (b - 1.0) / (b + 1.0)


def tail_base(beta: float, d: int = 1) -> float:
    """x = 27 q_1 / 4, the base of the geometric tail bound on P[|B| = k]."""
    b = _effective(beta, d)
    return 27.0 / (4.0 * (b + 1.0))


def series_paper(x: float) -> float:
    """15 x^2 (1 - x)^-4, the closed form stated for the weighted k-sum."""
    if x >= 1.0:
        raise DivergentBound(f"tail base {x} >= 1")
    return PAPER_SERIES_FACTOR * x**2 / (1.0 - x) ** 4


def series_direct(x: float, rtol: float = 1e-13) -> float:
    """sum_{k>=2} (3k+1) k (k-2) x^k summed term by term."""
    if x >= 1.0:
        raise DivergentBound(f"tail base {x} >= 1")
    if x <= 0.0:
        return 0.0
    total = 0.0
    start = 3
    chunk = 512
    while True:
        k = np.arange(start, start + chunk, dtype=float)
        terms = (3 * k + 1) * k * (k - 2) * np.exp(k * math.log(x))
        total += float(terms.sum())
        # terms are eventually decreasing; stop once the chunk tail is negligible
        if terms[-1] <= rtol * total * (1.0 - x) and terms[-1] <= terms[-2]:
            return total
        start += chunk


def C_of_beta(beta: float, d: int = 1, variant: Variant = "paper") -> float:
    """Aggregate bound C(beta); C < 1 certifies v(beta + eps) > v(beta)."""
    b = _effective(beta, d)
    if b <= 1.0:
        raise ValueError("requires d*beta > 1")
    p1 = b / (b + 1.0)
    q1 = 1.0 / (b + 1.0)
    x = 27.0 * q1 / 4.0
    if variant == "paper":
        s = series_paper(x)
    elif variant == "direct":
        s = series_direct(x)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return s / (p1**4 * p_inf(beta, d) * q1)


@dataclass(frozen=True)
class Threshold:
    beta: float
    d: int
    variant: str
    C_below: float  # C at beta - 1e-6
    C_above: float  # C at beta + 1e-6
    locally_decreasing: bool

    @property
    def certified(self) -> bool:
        return self.C_below > 1.0 > self.C_above and self.locally_decreasing


def threshold_search(d: int = 1, variant: Variant = "paper", xtol: float = 1e-10) -> Threshold:
    """Crossing point of C(beta) = 1 by bisection.

    The bracket starts just above the divergence point 27 q_1 / 4 = 1,
    where C is infinite, and doubles its upper end until C < 1.
    """
    lo = (23.0 / 4.0) / d * (1.0 + 1e-9)
    hi = 2.0 * lo
    while C_of_beta(hi, d, variant) >= 1.0:
        lo, hi = hi, 2.0 * hi
    beta = bisect(lambda b: C_of_beta(b, d, variant) - 1.0, lo, hi, xtol=xtol, rtol=1e-15)
    grid = beta + np.linspace(-1e-3, 1e-3, 21) * max(beta, 1.0)
    values = np.array([C_of_beta(b, d, variant) for b in grid])
    return Threshold(
        beta=float(beta),
        d=d,
        variant=variant,
        C_below=C_of_beta(beta - 1e-6, d, variant),
        C_above=C_of_beta(beta + 1e-6, d, variant),
        locally_decreasing=bool(np.all(np.diff(values) < 0)),
    )


def theorem3_rate(dist: OffspringDistribution, beta: float) -> float:
    """Large-bias slope of the speed: 2 E[1/Z] / beta^2."""
    if not beta > 1:
        raise ValueError("beta must exceed 1")
    return 2.0 * dist.inverse_mean / beta**2


@dataclass(frozen=True)
class LemmaBounds:
    lemma1_lower: float
    lemma2_upper: float
    tail: float


def lemma_bounds(
    dist: OffspringDistribution,
    beta: float,
    eps: float,
    k: int,
    prob_B_k: float | None = None,
    d: int = 1,
) -> LemmaBounds:
    """Lower bound on P~[D_1], upper bound on P~[D_k], and the tail bound on P[|B| = k].

    The D_k bound uses ``prob_B_k`` when supplied (audits) and the geometric
    tail (27 q_1/4)^k otherwise.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if prob_B_k is not None and not 0.0 <= prob_B_k <= 1.0:
        raise ValueError("prob_B_k must lie in [0, 1]")
    b = _effective(beta, d)
    p1 = b / (b + 1.0)
    q1 = 1.0 / (b + 1.0)
    e = expected_epsilon(dist, beta, eps)
    tail = tail_base(beta, d) ** k
    pb = tail if prob_B_k is None else prob_B_k
    if e == 0.0:
        coeff = 0.0
    else:
        coeff = e / (q1 * p_inf(beta, d))
    return LemmaBounds(
        lemma1_lower=p1**4 * e,
        lemma2_upper=coeff * k * (3 * k + 1) * pb,
        tail=tail,
    )


@dataclass(frozen=True)
class BoundReport:
    beta: float
    eps: float
    d: int
    p_1: float
    q_1: float
    p_inf: float
    p_escape: float
    expected_eps: float
    lemma1_lower: float
    lemma2_prefactor: float  # multiply by k (3k+1) P[|B| = k]
    tail_base: float
    series_value: float | None
    series_value_direct: float | None
    C_paper: float | None
    C_direct: float | None
    divergent: bool
    rate_theorem3: float

    def lemma2_coefficient(self, k: int) -> float:
        return self.lemma2_prefactor * k * (3 * k + 1)

    def as_dict(self) -> dict:
        return asdict(self)


def bound_report(dist: OffspringDistribution, beta: float, eps: float, d: int = 1) -> BoundReport:
    b = _effective(beta, d)
    if b <= 1.0:
        raise ValueError(f"requires d*beta > 1, got {b}")
    p1 = b / (b + 1.0)
    q1 = 1.0 / (b + 1.0)
    x = tail_base(beta, d)
    e = expected_epsilon(dist, beta, eps)
    pinf = p_inf(beta, d)
    divergent = x >= 1.0
    if divergent:
        s_p = s_d = c_p = c_d = None
    else:
        s_p, s_d = series_paper(x), series_direct(x)
        c_p, c_d = C_of_beta(beta, d, "paper"), C_of_beta(beta, d, "direct")
    return BoundReport(
        beta=beta,
        eps=eps,
        d=d,
        p_1=p1,
        q_1=q1,
        p_inf=pinf,
        p_escape=escape_probability(beta, d),
        expected_eps=e,
        lemma1_lower=p1**4 * e,
        lemma2_prefactor=e / (q1 * pinf),
        tail_base=x,
        series_value=s_p,
        series_value_direct=s_d,
        C_paper=c_p,
        C_direct=c_d,
        divergent=divergent,
        rate_theorem3=2.0 * dist.inverse_mean / beta**2 if beta > 1 else float("nan"),
    )
