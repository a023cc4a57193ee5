"""Regeneration times of the integer walk Y and the segments they cut out.

A time n0 is a regeneration time when Y_{n0} is a strict running maximum
and the future of Y stays strictly above it (``strict``), or never goes
below it (``nonstrict``). On a finite path the future is only partly
observed, so a time is *confirmed* only when the final value of Y exceeds
its level by more than ``margin``; later candidates are *undecided*. A
confirmed time is invalidated afterwards with probability at most
``b**-margin`` for the b-biased walk.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .bounds import escape_probability, p_inf  # noqa: F401  (re-exported)
from .coupling import CoupledTrajectory

Mode = Literal["strict", "nonstrict"]

INVALIDATION_TARGET = 1e-9


def default_margin(y_bias: float, target: float = INVALIDATION_TARGET) -> int:
    """Smallest M with y_bias**-M <= target."""
    if not y_bias > 1:
        raise ValueError("the integer walk must be transient (bias > 1)")
    m = math.ceil(math.log(1.0 / target) / math.log(y_bias) - 1e-12)
    return max(1, m)


@dataclass(frozen=True)
class RegenConfig:
    mode: Mode = "strict"
    margin: int | None = None  # None: default_margin(beta)

    def __post_init__(self) -> None:
        if self.mode not in ("strict", "nonstrict"):
            raise ValueError(f"unknown regeneration mode {self.mode!r}")
        if self.margin is not None and self.margin < 1:
            raise ValueError("confirmation margin must be >= 1")

    def resolve_margin(self, y_bias: float) -> int:
        return self.margin if self.margin is not None else default_margin(y_bias)


class ZeroSR(enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNDECIDED = "undecided"


def regen_masks(y: np.ndarray, mode: Mode, margin: int) -> tuple[np.ndarray, np.ndarray]:
    """(confirmed, undecided) masks for every time of every row of ``y``.

    ``y`` may be 1-D (one path) or 2-D (rows of paths of equal length).
    Times that fail the definition on the observed path are in neither mask.
    """
    y = np.asarray(y, dtype=np.int64)
    big = np.iinfo(np.int64).max // 2
    prev_max = np.empty_like(y)
    prev_max[..., 0] = -big
    np.maximum.accumulate(y[..., :-1], axis=-1, out=prev_max[..., 1:])
    fut_min = np.empty_like(y)
    fut_min[..., -1] = big
    fut_min[..., :-1] = np.minimum.accumulate(y[..., :0:-1], axis=-1)[..., ::-1]
    if mode == "strict":
        future_ok = y < fut_min
    elif mode == "nonstrict":
        future_ok = y <= fut_min
    else:
        raise ValueError(f"unknown regeneration mode {mode!r}")
    candidate = (y > prev_max) & future_ok
    settled = (y[..., -1:] - y) > margin
    return candidate & settled, candidate & ~settled


def detect_regens(y_path, beta: float, config: RegenConfig = RegenConfig()) -> np.ndarray:
    """Confirmed regeneration times of one path, ascending.

    ``beta`` is the bias of the integer walk and only sets the default margin.
    """
    y = np.asarray(y_path)
    if y.ndim != 1 or y.size == 0 or y[0] != 0:
        raise ValueError("y_path must be a 1-D path starting at 0")
    if y.size > 1 and not np.all(np.abs(np.diff(y)) == 1):
        raise ValueError("y_path must have +-1 increments")
    confirmed, _ = regen_masks(y, config.mode, config.resolve_margin(beta))
    return np.flatnonzero(confirmed)


def check_zero_sr(y_path, beta: float, config: RegenConfig = RegenConfig()) -> ZeroSR:
    """Whether time 0 is a regeneration time of the observed path."""
    y = np.asarray(y_path)
    confirmed, undecided = regen_masks(y, config.mode, config.resolve_margin(beta))
    if confirmed[0]:
        return ZeroSR.HOLDS
    if undecided[0]:
        return ZeroSR.UNDECIDED
    return ZeroSR.FAILS


# per-row status codes for first_regen_rows
FOUND, UNDECIDED = 0, 1


def first_regen_rows(
    y: np.ndarray, mode: Mode, margin: int, min_time: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """First regeneration time >= ``min_time`` in each row.

    Returns ``(status, tau)``; ``status`` is FOUND or UNDECIDED (an earlier
    candidate is not yet settled, or no candidate is in view) and ``tau`` is
    -1 unless FOUND.
    """
    confirmed, undecided = regen_masks(y, mode, margin)
    confirmed = confirmed[:, min_time:]
    open_ = confirmed | undecided[:, min_time:]
    any_open = open_.any(axis=1)
    first = np.argmax(open_, axis=1)
    rows = np.arange(y.shape[0])
    found = any_open & confirmed[rows, first]
    status = np.where(found, FOUND, UNDECIDED)
    tau = np.where(found, first + min_time, -1)
    return status, tau


@dataclass(frozen=True)
class Segment:
    """One block between consecutive regeneration times."""

    start: int
    end: int
    gain_beta: int
    gain_beta_eps: int

    @property
    def length(self) -> int:
        return self.end - self.start

    def records(self, traj: CoupledTrajectory) -> list[dict]:
        return [traj.record(t) for t in range(self.start + 1, self.end + 1)]


@dataclass(eq=False)
class SegmentTable:
    """Column store of segments cut from one trajectory (or many, merged)."""

    start: np.ndarray
    end: np.ndarray
    gain_beta: np.ndarray
    gain_beta_eps: np.ndarray

    def __len__(self) -> int:
        return self.start.size

    def __getitem__(self, i: int) -> Segment:
        return Segment(int(self.start[i]), int(self.end[i]),
                       int(self.gain_beta[i]), int(self.gain_beta_eps[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def length(self) -> np.ndarray:
        return self.end - self.start

    @property
    def gap(self) -> np.ndarray:
        return self.gain_beta_eps - self.gain_beta

    def gain(self, walk: str) -> np.ndarray:
        if walk in ("beta", "a"):
            return self.gain_beta
        if walk in ("beta_eps", "b"):
            return self.gain_beta_eps
        raise ValueError(f"unknown walk {walk!r}")


def split_segments(traj: CoupledTrajectory, regens: np.ndarray) -> SegmentTable:
    """Segments between consecutive confirmed regeneration times.

    The block before the first regeneration and the undecided tail are
    dropped; fewer than two regenerations give an empty table.
    """
    r = np.asarray(regens, dtype=np.int64)
    if r.size < 2:
        empty = np.empty(0, dtype=np.int64)
        return SegmentTable(empty, empty.copy(), empty.copy(), empty.copy())
    da = traj.depth_beta.astype(np.int64)
    db = traj.depth_beta_eps.astype(np.int64)
    return SegmentTable(
        start=r[:-1],
        end=r[1:],
        gain_beta=da[r[1:]] - da[r[:-1]],
        gain_beta_eps=db[r[1:]] - db[r[:-1]],
    )


def regens_of(traj: CoupledTrajectory, config: RegenConfig = RegenConfig()) -> np.ndarray:
    return detect_regens(traj.y, traj.params.y_bias, config)
