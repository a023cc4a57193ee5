"""Exhaustive check of the relation between tau_1 and |B| on short paths.

Every +-1 prefix of length ``max_len`` is extended by an infinite run of
forward steps, which settles every regeneration question exactly. For
each prefix whose first nonzero regeneration time tau_1 falls inside the
prefix we record tau_1 and the number of back steps in [1, tau_1].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_ENUM_LEN = 20


@dataclass(frozen=True)
class EnumerationResult:
    max_len: int
    mode: str
    b_count: np.ndarray  # per retained prefix
    tau: np.ndarray

    def max_tau(self) -> dict[int, int]:
        """Largest tau_1 seen for each value of |B|."""
        out: dict[int, int] = {}
        for k in np.unique(self.b_count):
            out[int(k)] = int(self.tau[self.b_count == k].max())
        return out

    def exceptions(self, coeff: int) -> int:
        """Prefixes with tau_1 > coeff * |B| + 1."""
        return int(np.count_nonzero(self.tau > coeff * self.b_count + 1))

    def contains(self, b: int, tau: int) -> bool:
        return bool(np.any((self.b_count == b) & (self.tau == tau)))

    def smallest_valid_window(self, upto: int = 10) -> int | None:
        for w in range(1, upto + 1):
            if self.exceptions(w) == 0:
                return w
        return None


def all_prefixes(max_len: int) -> np.ndarray:
    """(2**max_len, max_len) array of +-1 steps; row i encodes i in binary (1 bit = back step)."""
    codes = np.arange(2**max_len, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(max_len, dtype=np.int64)) & 1
    return (1 - 2 * bits).astype(np.int8)


def enumerate_paths(max_len: int, mode: str = "strict") -> EnumerationResult:
    if not 1 <= max_len <= MAX_ENUM_LEN:
        raise ValueError(f"max_len must be in 1..{MAX_ENUM_LEN}")
    if mode not in ("strict", "nonstrict"):
        raise ValueError(f"unknown regeneration mode {mode!r}")
    steps = all_prefixes(max_len)
    n = steps.shape[0]
    y = np.zeros((n, max_len + 1), dtype=np.int64)
    np.cumsum(steps, axis=1, out=y[:, 1:])

    prev_max = np.maximum.accumulate(y[:, :-1], axis=1)  # max over [0, t-1], t = 1..L
    new_max = y[:, 1:] > prev_max
    # the forward tail never dips, so the future minimum after t < L is seen
    # inside the prefix; after t = L it is y_L + 1
    fut_min = np.empty((n, max_len), dtype=np.int64)
    fut_min[:, -1] = y[:, -1] + 1
    if max_len > 1:
        fut_min[:, :-1] = np.minimum.accumulate(y[:, :1:-1], axis=1)[:, ::-1]
    level = y[:, 1:]
    future_ok = level < fut_min if mode == "strict" else level <= fut_min
    regen = new_max & future_ok
    found = regen.any(axis=1)
    tau = np.argmax(regen, axis=1) + 1
    back = np.cumsum(steps < 0, axis=1)
    b = back[np.arange(n), tau - 1]
    return EnumerationResult(max_len, mode, b[found], tau[found])
