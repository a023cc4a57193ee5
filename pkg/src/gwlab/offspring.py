"""Offspring law of a leafless Galton-Watson tree."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

_SUM_TOL = 1e-9


@dataclass(frozen=True)
class OffspringDistribution:
    """Finite-support law of the offspring count Z, with Z >= 1.

    Atoms are stored sorted by k. Use :func:`make_distribution` (or
    :func:`parse_spec`) rather than building one by hand.
    """

    ks: tuple[int, ...]
    weights: tuple[float, ...]
    mean: float = field(init=False)
    inverse_mean: float = field(init=False)
    min_degree: int = field(init=False)

    def __post_init__(self) -> None:
        if len(self.ks) == 0 or len(self.ks) != len(self.weights):
            raise ValueError("atoms and weights must be nonempty and aligned")
        if list(self.ks) != sorted(set(self.ks)):
            raise ValueError("atoms must be distinct and sorted ascending")
        if self.ks[0] < 1:
            raise ValueError("leaf atom forbidden: offspring counts must be >= 1")
        if min(self.weights) <= 0.0:
            raise ValueError("weights must be strictly positive")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        w = np.asarray(self.weights)
        k = np.asarray(self.ks, dtype=float)
        object.__setattr__(self, "mean", float(w @ k))
        object.__setattr__(self, "inverse_mean", float(w @ (1.0 / k)))
        object.__setattr__(self, "min_degree", int(self.ks[0]))

    @property
    def max_degree(self) -> int:
        return int(self.ks[-1])

    @property
    def is_point_mass(self) -> bool:
        return len(self.ks) == 1

    def pmf(self, k: int) -> float:
        try:
            return self.weights[self.ks.index(k)]
        except ValueError:
            return 0.0

    def cdf_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Atoms and cumulative weights, for inverse-CDF sampling."""
        cdf = np.cumsum(self.weights)
        cdf[-1] = 1.0
        return np.asarray(self.ks, dtype=np.int32), cdf

    def to_spec(self) -> str:
        if self.is_point_mass:
            return f"const:{self.ks[0]}"
        return ",".join(f"{k}:{w!r}" for k, w in zip(self.ks, self.weights))

    def __str__(self) -> str:
        return self.to_spec()


def make_distribution(pairs: Iterable[tuple[int, float]]) -> OffspringDistribution:
    """Validate and normalize ``(k, weight)`` pairs.

    Weights are renormalized when their total is within 1e-9 of one and
    rejected otherwise.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty offspring distribution")
    seen = set()
    for k, w in pairs:
        if int(k) != k:
            raise ValueError(f"offspring count {k!r} is not an integer")
        if k <= 0:
            raise ValueError(f"leaf atom forbidden: got offspring count {k}")
        if not w > 0:
            raise ValueError(f"nonpositive weight {w} for offspring count {k}")
        if k in seen:
            raise ValueError(f"duplicate offspring count {k}")
        seen.add(k)
    total = float(sum(w for _, w in pairs))
    if abs(total - 1.0) >= _SUM_TOL:
        raise ValueError(f"weights sum to {total}, not 1")
    pairs.sort()
    return OffspringDistribution(
        ks=tuple(int(k) for k, _ in pairs),
        weights=tuple(float(w) / total for _, w in pairs),
    )


def point_mass(k: int) -> OffspringDistribution:
    return make_distribution([(k, 1.0)])


def uniform(ks: Sequence[int]) -> OffspringDistribution:
    return make_distribution([(k, 1.0 / len(ks)) for k in ks])


def parse_spec(text: str) -> OffspringDistribution:
    """Parse ``"k1:w1,k2:w2,..."`` or the shorthand ``"const:k"``."""
    text = text.strip()
    if text.startswith("const:"):
        try:
            return point_mass(int(text[len("const:"):]))
        except ValueError as exc:
            raise ValueError(f"bad offspring spec {text!r}: {exc}") from None
    pairs = []
    for item in text.split(","):
        try:
            k, w = item.split(":")
            pairs.append((int(k), float(w)))
        except ValueError:
            raise ValueError(f"bad offspring spec item {item!r} in {text!r}") from None
    return make_distribution(pairs)


def expected_epsilon(dist: OffspringDistribution, beta: float, eps: float) -> float:
    """E[q_Z(beta) - q_Z(beta + eps)], where q_k(b) = 1 / (k b + 1)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    k = np.asarray(dist.ks, dtype=float)
    w = np.asarray(dist.weights)
    # q_k(b) - q_k(b+e) = k e / ((k b + 1)(k (b+e) + 1)), no cancellation
    terms = k * eps / ((k * beta + 1.0) * (k * (beta + eps) + 1.0))
    return float(w @ terms)


def sample_offspring(dist: OffspringDistribution, rng: np.random.Generator) -> int:
    return int(sample_offspring_array(dist, rng, 1)[0])


def sample_offspring_array(
    dist: OffspringDistribution, rng: np.random.Generator, size: int
) -> np.ndarray:
    """``size`` i.i.d. draws by inverse-CDF search on one uniform each."""
    ks, cdf = dist.cdf_table()
    u = rng.random(size)
    idx = np.searchsorted(cdf, u, side="right")
    np.minimum(idx, len(ks) - 1, out=idx)
    return ks[idx]
