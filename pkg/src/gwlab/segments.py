"""Classification of regeneration segments and the estimators built on them.

Within a segment both tree walks start from freshly discovered sites with
the same number of children, so their relative paths agree until the
first step where one goes back and the other forward (the decoupling time
delta). A segment is *coupled* (event C) if that never happens, otherwise
*decoupled with k back steps* (event D_k), k being the number of steps of
the segment at which Y stepped back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import expected_epsilon, lemma_bounds, tail_base, theorem3_rate
from .coupling import BiasParams, CoupledTrajectory, partition_tables
from .enumeration import enumerate_paths
from .offspring import OffspringDistribution
from .regeneration import SegmentTable
from .report import FAIL, INFO, PASS, Row
from .stats import (
    Estimate,
    batch_means,
    mean_estimate,
    one_sided_p,
    ratio_estimate,
    two_proportion_z,
    wilson,
)


@dataclass(frozen=True)
class SegmentSummary:
    decoupled: bool
    b_count: int
    delta_offset: int | None
    gain_beta: int
    gain_beta_eps: int
    length: int

    @property
    def label(self) -> str:
        return f"D_{self.b_count}" if self.decoupled else "C"

    @property
    def gap(self) -> int:
        return self.gain_beta_eps - self.gain_beta


@dataclass(eq=False)
class SummaryTable:
    """Column store of segment summaries plus diagnostics taken at delta.

    Diagnostic columns hold -1 (or nan) on coupled segments.
    """

    decoupled: np.ndarray
    b_count: np.ndarray
    delta_offset: np.ndarray
    gain_beta: np.ndarray
    gain_beta_eps: np.ndarray
    length: np.ndarray
    jump_at_delta: np.ndarray
    back_at_delta: np.ndarray
    u_at_delta: np.ndarray
    threshold_at_delta: np.ndarray
    kids_match_at_delta: np.ndarray

    def __len__(self) -> int:
        return self.length.size

    def __getitem__(self, i: int) -> SegmentSummary:
        dec = bool(self.decoupled[i])
        return SegmentSummary(
            decoupled=dec,
            b_count=int(self.b_count[i]),
            delta_offset=int(self.delta_offset[i]) if dec else None,
            gain_beta=int(self.gain_beta[i]),
            gain_beta_eps=int(self.gain_beta_eps[i]),
            length=int(self.length[i]),
        )

    @property
    def gap(self) -> np.ndarray:
        return self.gain_beta_eps - self.gain_beta

    @property
    def label_k(self) -> np.ndarray:
        """0 for C, k for D_k."""
        return np.where(self.decoupled, self.b_count, 0)

    @classmethod
    def concat(cls, tables: list["SummaryTable"]) -> "SummaryTable":
        names = cls.__dataclass_fields__.keys()
        return cls(**{n: np.concatenate([getattr(t, n) for t in tables]) for n in names})

    @classmethod
    def empty(cls) -> "SummaryTable":
        return cls.concat([_EMPTY])


def classify_table(segments: SegmentTable, traj: CoupledTrajectory) -> SummaryTable:
    """Summaries of every segment of ``traj``; vectorized over segments."""
    params = traj.params
    start = segments.start.astype(np.int64)
    end = segments.end.astype(np.int64)
    back = traj.back_steps
    cumback = np.concatenate([[0], np.cumsum(back, dtype=np.int64)])
    b_count = cumback[end] - cumback[start]

    split = traj.split_steps
    idx = np.searchsorted(split, start, side="right")
    if split.size:
        cand = split[np.minimum(idx, split.size - 1)]
        has = (idx < split.size) & (cand <= end)
    else:
        cand = np.zeros_like(start)
        has = np.zeros(start.shape, dtype=bool)
    delta = np.where(has, cand, 1)  # dummy index 1 where coupled, masked below

    gap = traj.gap
    kmax = int(max(traj.kids_beta.max(), traj.kids_beta_eps.max()))
    _, _, e_tab = partition_tables(params, kmax)
    k_at = traj.kids_beta[delta - 1]
    return SummaryTable(
        decoupled=has,
        b_count=b_count,
        delta_offset=np.where(has, delta - start, -1),
        gain_beta=segments.gain_beta.astype(np.int64),
        gain_beta_eps=segments.gain_beta_eps.astype(np.int64),
        length=end - start,
        jump_at_delta=np.where(has, gap[delta] - gap[delta - 1], 0),
        back_at_delta=np.where(has, back[delta - 1], False),
        u_at_delta=np.where(has, traj.u[delta - 1], np.nan),
        threshold_at_delta=np.where(has, e_tab[k_at], np.nan),
        kids_match_at_delta=np.where(has, k_at == traj.kids_beta_eps[delta - 1], True),
    )


def classify(segment, traj: CoupledTrajectory) -> SegmentSummary:
    """Summary of a single :class:`~gwlab.regeneration.Segment`."""
    one = SegmentTable(
        np.array([segment.start]), np.array([segment.end]),
        np.array([segment.gain_beta]), np.array([segment.gain_beta_eps]),
    )
    return classify_table(one, traj)[0]


_z = np.empty(0, dtype=np.int64)
_EMPTY = SummaryTable(
    np.empty(0, bool), _z, _z, _z, _z, _z, _z, np.empty(0, bool),
    np.empty(0), np.empty(0), np.empty(0, bool),
)


# ---------------------------------------------------------------- invariants

def window_violations(summaries: SummaryTable, coeff: int) -> int:
    """Segments with length > coeff * |B| + 1."""
    return int(np.count_nonzero(summaries.length > coeff * summaries.b_count + 1))


def segment_invariants(summaries: SummaryTable, window_coeff: int | None = None) -> dict[str, int]:
    """Violation counts of the structural claims about segments."""
    s = summaries
    dec = s.decoupled
    k = s.b_count
    out = {
        "coupled_equal_gains": int(np.count_nonzero(~dec & (s.gap != 0))),
        "decoupled_gap_lower_bound": int(np.count_nonzero(dec & (s.gap < 4 - 2 * k))),
        "delta_in_B": int(np.count_nonzero(dec & ~s.back_at_delta)),
        "jump_at_delta_is_2": int(np.count_nonzero(dec & (s.jump_at_delta != 2))),
        "u_below_eps_at_delta": int(np.count_nonzero(dec & ~(s.u_at_delta < s.threshold_at_delta))),
        "same_child_count_at_delta": int(np.count_nonzero(~s.kids_match_at_delta)),
        "D1_gap_is_2": int(np.count_nonzero(dec & (k == 1) & (s.gap != 2))),
    }
    if window_coeff is not None:
        out[f"window_{window_coeff}k+1"] = window_violations(s, window_coeff)
    return out


def trajectory_invariants(traj: CoupledTrajectory, regens: np.ndarray) -> dict[str, int]:
    """Violation counts of the pathwise claims along one trajectory."""
    dy = np.diff(traj.y.astype(np.int64))
    da = np.diff(traj.depth_beta.astype(np.int64))
    db = np.diff(traj.depth_beta_eps.astype(np.int64))
    dgap = db - da
    back = dy < 0
    out = {
        "domination_beta": int(np.count_nonzero(da < dy)),
        "domination_beta_eps": int(np.count_nonzero(db < dy)),
        "gap_moves_only_on_back_steps": int(np.count_nonzero(~back & (dgap != 0))),
        "gap_increment_in_pm2": int(np.count_nonzero(~np.isin(dgap, (-2, 0, 2)))),
    }
    delta = traj.delta
    if delta is None:
        out["first_decoupling"] = 0
    else:
        _, _, e_tab = partition_tables(traj.params, int(traj.kids_beta.max()))
        k = traj.kids_beta[delta - 1]
        ok = (
            traj.u[delta - 1] < e_tab[k]
            and np.array_equal(traj.vertex_beta[:delta], traj.vertex_beta_eps[:delta])
            and dgap[delta - 1] == 2
        )
        out["first_decoupling"] = 0 if ok else 1
    # regeneration times of Y are regeneration times of both tree walks
    bad = 0
    r = np.asarray(regens, dtype=np.int64)
    for depth, fresh in ((traj.depth_beta, traj.new_beta), (traj.depth_beta_eps, traj.new_beta_eps)):
        d = depth.astype(np.int64)
        fut_min = np.minimum.accumulate(d[::-1])[::-1]  # min over [t, n]
        later = np.append(fut_min[1:], np.iinfo(np.int64).max)[r]
        past_max = np.maximum.accumulate(np.concatenate([[-1], d[:-1]]))[r]
        bad += int(np.count_nonzero((later <= d[r]) | (past_max >= d[r]) | ~fresh[r]))
    bad += int(np.count_nonzero(traj.kids_beta[r] != traj.kids_beta_eps[r]))
    out["super_regeneration"] = bad
    return out


# ---------------------------------------------------------------- estimators

def speed_regen(segments, walk: str = "beta") -> Estimate:
    """Mean gain over mean length across segments (ratio estimator)."""
    if len(segments) < 2:
        raise ValueError("need at least two segments")
    if isinstance(segments, SummaryTable):
        gain = segments.gain_beta if walk in ("beta", "a") else segments.gain_beta_eps
    else:
        gain = segments.gain(walk)
    return ratio_estimate(gain, segments.length, method="regeneration-ratio")


def speed_ergodic(traj: CoupledTrajectory, walk: str = "beta") -> Estimate:
    """Final depth over elapsed time, with a batch-means standard error."""
    n = traj.n_steps
    if n < 1000:
        raise ValueError("trajectory too short for batch means (need >= 1000 steps)")
    depth = traj.depth(walk).astype(np.int64)
    _, se, _ = batch_means(np.diff(depth))
    return Estimate(float(depth[-1]) / n, se, n, "ergodic-batch-means")


def gap_estimator(segments) -> Estimate:
    """Mean gain difference (beta+eps minus beta) per segment.

    Its sign is the sign of v(beta + eps) - v(beta); ``p_value`` tests
    H0: mean <= 0.
    """
    if len(segments) < 2:
        raise ValueError("need at least two segments")
    est = mean_estimate(segments.gap, method="gap")
    return Estimate(est.value, est.stderr, est.count, est.method, one_sided_p(est.value, est.stderr))


def speed_gap(segments) -> Estimate:
    """v(beta + eps) - v(beta) as mean gap over mean segment length."""
    return ratio_estimate(segments.gap, segments.length, method="speed-gap")


# ---------------------------------------------------------------- tables

@dataclass(frozen=True)
class ProbRow:
    name: str
    count: int
    n: int
    value: float
    stderr: float
    lo: float
    hi: float
    bound: float | None = None


@dataclass
class ProbTable:
    n: int
    rows: dict[str, ProbRow] = field(default_factory=dict)

    def __getitem__(self, name: str) -> ProbRow:
        return self.rows[name]

    def get(self, name: str) -> ProbRow:
        """Row by name, or an all-zero row when the event was never observed."""
        if name in self.rows:
            return self.rows[name]
        return _prob_row(name, 0, self.n)

    def names(self) -> list[str]:
        return list(self.rows)


def _prob_row(name: str, count: int, n: int, bound: float | None = None) -> ProbRow:
    p = count / n
    lo, hi = wilson(count, n)
    return ProbRow(name, int(count), int(n), p, math.sqrt(p * (1 - p) / n), lo, hi, bound)


MIN_TABLE_SAMPLE = 100


def prob_table(summaries: SummaryTable, tail_x: float | None = None) -> ProbTable:
    """Frequencies of C, D_k and |B| = k with Wilson 95% intervals.

    Rows cover every observed k plus tail rows ``D_>K`` and ``B>K``. When
    ``tail_x`` (the geometric base 27 q_1 / 4) is given and below 1, the
    tail rows carry the bound sum_{k>K} x^k as ``bound``.
    """
    n = len(summaries)
    if n < MIN_TABLE_SAMPLE:
        raise ValueError(f"need at least {MIN_TABLE_SAMPLE} segment summaries, got {n}")
    table = ProbTable(n)
    kmax = int(summaries.b_count.max())
    dec = summaries.decoupled
    table.rows["C"] = _prob_row("C", int(np.count_nonzero(~dec)), n)
    dk = np.bincount(summaries.b_count[dec], minlength=kmax + 1)
    for k in range(1, kmax + 1):
        table.rows[f"D_{k}"] = _prob_row(f"D_{k}", int(dk[k]), n)
    bk = np.bincount(summaries.b_count, minlength=kmax + 1)
    for k in range(kmax + 1):
        table.rows[f"B={k}"] = _prob_row(f"B={k}", int(bk[k]), n)
    tail = None
    if tail_x is not None and tail_x < 1.0:
        tail = tail_x ** (kmax + 1) / (1.0 - tail_x)
    table.rows[f"D_>{kmax}"] = _prob_row(f"D_>{kmax}", 0, n, tail)
    table.rows[f"B>{kmax}"] = _prob_row(f"B>{kmax}", 0, n, tail)
    return table


def compare_tables(a: ProbTable, b: ProbTable, nsigma: float = 4.0) -> list[Row]:
    """Cell-wise two-proportion z tests between two samples of one law."""
    names = [n for n in a.names() if not n.startswith(("D_>", "B>"))]
    names += [n for n in b.names() if n not in names and not n.startswith(("D_>", "B>"))]
    rows = []
    for name in names:
        ra, rb = a.get(name), b.get(name)
        z = two_proportion_z(ra.count, ra.n, rb.count, rb.n)
        se = math.sqrt(ra.stderr**2 + rb.stderr**2)
        rows.append(Row(name, ra.value - rb.value, se, 0.0, z, PASS if abs(z) <= nsigma else FAIL))
    return rows


# ---------------------------------------------------------------- audits

@dataclass
class UnconditionedB:
    """|B| and tau_1 from unconditioned runs of Y (tau_1 may be 0)."""

    b_count: np.ndarray
    tau: np.ndarray

    def __len__(self) -> int:
        return self.b_count.size

    def prob(self, k: int) -> tuple[float, float]:
        n = self.b_count.size
        p = float(np.count_nonzero(self.b_count == k)) / n
        return p, math.sqrt(p * (1 - p) / n)


ORACLE_LEN = 16


def _margin(diff: float, se: float) -> float:
    if se == 0.0:
        return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    return diff / se


def lemma_audit(
    summaries: SummaryTable,
    unconditioned: UnconditionedB | None,
    beta: float,
    eps: float,
    dist: OffspringDistribution,
    window_coeffs=(3, 4),
    nsigma: float = 3.0,
    kmax_tail: int = 6,
    d: int = 1,
    mode: str = "strict",
    min_count: int = 10,
) -> list[Row]:
    """Empirical value, analytic bound and margin for each lemma-level claim.

    Soft claims pass when the empirical value is on the right side of the
    bound up to ``nsigma`` standard errors. Window claims (tau_1 versus
    |B|) count exact violations; a window is only asserted when exhaustive
    enumeration in ``mode`` finds no exception to it, otherwise its
    violation rate is reported for information.

    The upper bound on P~[D_k] uses the unconditioned frequency of
    |B| = k when at least ``min_count`` runs hit it, and the geometric
    tail otherwise.
    """
    rows: list[Row] = []
    n = len(summaries)
    oracle = enumerate_paths(ORACLE_LEN, mode)
    for w in window_coeffs:
        hard = oracle.exceptions(w) == 0
        v = window_violations(summaries, w)
        rows.append(Row(f"window_{w}k+1/segments", v / n, None, 0.0, None,
                        (PASS if v == 0 else FAIL) if hard else INFO))
        if unconditioned is not None:
            vu = int(np.count_nonzero(unconditioned.tau > w * unconditioned.b_count + 1))
            rows.append(Row(f"window_{w}k+1/unconditioned", vu / len(unconditioned),
                            None, 0.0, None, (PASS if vu == 0 else FAIL) if hard else INFO))

    table = prob_table(summaries)
    d1 = table.get("D_1")
    lb = lemma_bounds(dist, beta, eps, 1, d=d)
    m = _margin(d1.value - lb.lemma1_lower, d1.stderr)
    rows.append(Row("decoupling_lower/P~[D_1]", d1.value, d1.stderr, lb.lemma1_lower, m,
                    PASS if m >= -nsigma else FAIL))

    kmax = int(summaries.b_count.max()) if n else 0
    if unconditioned is not None:
        for k in range(2, max(kmax, 2) + 1):
            pb, pb_se = unconditioned.prob(k)
            dk = table.get(f"D_{k}")
            if pb * len(unconditioned) < min_count:
                pb, pb_se = None, 0.0
            b = lemma_bounds(dist, beta, eps, k, prob_B_k=pb, d=d)
            scale = b.lemma2_upper / pb if pb else 0.0
            se = math.sqrt(dk.stderr**2 + (scale * pb_se) ** 2)
            m = _margin(b.lemma2_upper - dk.value, se)
            rows.append(Row(f"decoupling_upper/P~[D_{k}]", dk.value, dk.stderr, b.lemma2_upper, m,
                            PASS if m >= -nsigma else FAIL))
        x = tail_base(beta, d)
        for k in range(2, kmax_tail + 1):
            pb, pb_se = unconditioned.prob(k)
            m = _margin(x**k - pb, pb_se)
            rows.append(Row(f"back_tail/P[|B|={k}]", pb, pb_se, x**k, m,
                            PASS if m >= -nsigma else FAIL))

    # gap >= 2(1{D_1} - sum_k (k-2) 1{D_k}) holds segment by segment
    k = summaries.b_count
    indicator = np.where(summaries.decoupled, np.where(k == 1, 1, -(k - 2)), 0)
    excess = mean_estimate(summaries.gap - 2 * indicator)
    lower = mean_estimate(2 * indicator)
    m = _margin(excess.value, excess.stderr)
    rows.append(Row("gap_aggregate/E~[gap]", float(summaries.gap.mean()), excess.stderr, lower.value, m,
                    PASS if m >= -4.0 else FAIL))
    return rows


@dataclass(frozen=True)
class RateTolerances:
    rate_rel: float = 0.30
    d1_rel: float = 0.15
    tau_range: tuple[float, float] = (1.0, 1.05)


def rate_check(
    summaries: SummaryTable,
    beta: float,
    eps: float,
    dist: OffspringDistribution,
    tol: RateTolerances = RateTolerances(),
) -> list[Row]:
    """Large-bias rate of the speed against 2 E[1/Z] / beta^2."""
    if eps <= 0:
        raise ValueError("eps must be positive for a rate")
    rate = theorem3_rate(dist, beta)
    gap = speed_gap(summaries)
    ratio = gap.value / eps / rate
    ratio_se = gap.stderr / eps / rate
    e = expected_epsilon(dist, beta, eps)
    d1 = prob_table(summaries).get("D_1")
    tau = mean_estimate(summaries.length)
    lo, hi = tol.tau_range
    return [
        Row("rate/speed_gap_over_eps", gap.value / eps, gap.stderr / eps, rate,
            _margin(gap.value / eps - rate, gap.stderr / eps), INFO),
        Row("rate/ratio_to_asymptote", ratio, ratio_se, 1.0, None,
            PASS if abs(ratio - 1.0) <= tol.rate_rel else FAIL),
        Row("rate/P~[D_1]_over_E[eps_Z]", d1.value / e, d1.stderr / e, 1.0, None,
            PASS if abs(d1.value / e - 1.0) <= tol.d1_rel else FAIL),
        Row("rate/E~[tau_1]", tau.value, tau.stderr, hi, None,
            PASS if lo <= tau.value <= hi else FAIL),
    ]
