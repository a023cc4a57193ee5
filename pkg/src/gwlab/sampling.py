"""Monte Carlo drivers: replicated long runs and rejection samplers.

Replica seeds are ``SeedSequence([master_seed, index])``; results are
merged in replica order so the outcome does not depend on how many
threads ran them.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coupling import (
    BiasParams,
    CoupledTrajectory,
    RandomnessStream,
    run_trajectory,
    simulate_batch,
)
from .offspring import OffspringDistribution, sample_offspring_array
from .regeneration import (
    FOUND,
    RegenConfig,
    SegmentTable,
    detect_regens,
    first_regen_rows,
    regen_masks,
    split_segments,
)
from .segments import (
    SummaryTable,
    UnconditionedB,
    classify_table,
    segment_invariants,
    speed_ergodic,
    trajectory_invariants,
)
from .stats import Estimate


def replica_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(index)])


def thread_count() -> int:
    env = os.environ.get("GWLAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class ReplicaResult:
    index: int
    n_steps: int
    summaries: SummaryTable
    n_regens: int
    ergodic: dict[str, Estimate]
    invariants: dict[str, int]


def run_replica(
    dist: OffspringDistribution,
    params: BiasParams,
    n_steps: int,
    master_seed: int,
    index: int,
    config: RegenConfig = RegenConfig(),
    keep: bool = False,
) -> ReplicaResult | tuple[ReplicaResult, CoupledTrajectory, np.ndarray]:
    traj = run_trajectory(dist, params, n_steps, seed=replica_seed(master_seed, index))
    regens = detect_regens(traj.y, params.y_bias, config)
    summaries = classify_table(split_segments(traj, regens), traj)
    window = 4 if config.mode == "strict" else 3
    inv = trajectory_invariants(traj, regens)
    inv.update(segment_invariants(summaries, window))
    ergodic = {}
    if n_steps >= 1000:
        ergodic = {w: speed_ergodic(traj, w) for w in ("beta", "beta_eps")}
    res = ReplicaResult(index, n_steps, summaries, int(regens.size), ergodic, inv)
    return (res, traj, regens) if keep else res


@dataclass
class RunResult:
    replicas: list[ReplicaResult] = field(default_factory=list)

    @property
    def summaries(self) -> SummaryTable:
        return SummaryTable.concat([r.summaries for r in self.replicas])

    @property
    def invariants(self) -> dict[str, int]:
        total: dict[str, int] = {}
        for r in self.replicas:
            for k, v in r.invariants.items():
                total[k] = total.get(k, 0) + v
        return total

    @property
    def n_segments(self) -> int:
        return sum(len(r.summaries) for r in self.replicas)

    @property
    def n_steps(self) -> int:
        return sum(r.n_steps for r in self.replicas)


def run_replicas(
    dist: OffspringDistribution,
    params: BiasParams,
    n_steps: int,
    replicas: int,
    master_seed: int,
    config: RegenConfig = RegenConfig(),
    first_index: int = 0,
    threads: int | None = None,
) -> RunResult:
    if replicas < 1:
        raise ValueError("need at least one replica")
    threads = min(threads or thread_count(), replicas)
    indices = range(first_index, first_index + replicas)

    def job(i):
        return run_replica(dist, params, n_steps, master_seed, i, config)

    if threads == 1:
        results = [job(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, indices))
    return RunResult(sorted(results, key=lambda r: r.index))


def run_until_segments(
    dist: OffspringDistribution,
    params: BiasParams,
    target_segments: int,
    n_steps: int,
    master_seed: int,
    config: RegenConfig = RegenConfig(),
    threads: int | None = None,
) -> RunResult:
    """Replicas 0, 1, ... up to the first one at which ``target_segments`` is reached.

    Replicas run in waves of ``threads``; surplus replicas from the last
    wave are discarded, so the kept set never depends on the thread count.
    """
    threads = threads or thread_count()
    result = RunResult()
    while result.n_segments < target_segments:
        wave = run_replicas(dist, params, n_steps, threads, master_seed, config,
                            first_index=len(result.replicas), threads=threads)
        for rep in wave.replicas:
            if result.n_segments >= target_segments:
                break
            result.replicas.append(rep)
    return result


# ------------------------------------------------------------ rejection sampling

@dataclass
class ConditionedSample:
    """Segments [0, tau_1] of fresh runs on which time 0 is a regeneration."""

    trials: int
    accepted: int
    summaries: SummaryTable

    @property
    def acceptance(self) -> float:
        return self.accepted / self.trials


def _extend(rows_u, rows_z, u_rng, z_rng, dist, extra):
    more_u = u_rng.random((rows_u.shape[0], extra))
    more_z = sample_offspring_array(dist, z_rng, rows_z.shape[0] * extra).reshape(-1, extra)
    return np.hstack([rows_u, more_u]), np.hstack([rows_z, more_z])


def _flat_trajectory(params: BiasParams, U: np.ndarray, Z: np.ndarray, out: dict) -> CoupledTrajectory:
    """Rows laid end to end; steps across row boundaries are meaningless."""
    pad = np.hstack([np.full((U.shape[0], 1), np.nan), U])
    return CoupledTrajectory(params=params, u=pad.ravel()[1:], z=Z.ravel(),
                             **{k: v.ravel() for k, v in out.items()})


def sample_conditioned(
    dist: OffspringDistribution,
    params: BiasParams,
    n_trials: int,
    seed,
    config: RegenConfig = RegenConfig(),
    length: int = 64,
    batch: int = 20000,
) -> ConditionedSample:
    """Realize the law of the first segment given 0-SR by rejection.

    Each trial runs the coupled walks from a fresh root. Trials whose status
    is not settled within the simulated horizon are extended with further
    randomness from the same streams until it is, so no trial is dropped.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    u_ss, z_ss = ss.spawn(2)
    u_rng = np.random.Generator(np.random.PCG64(u_ss))
    z_rng = np.random.Generator(np.random.PCG64(z_ss))
    margin = config.resolve_margin(params.y_bias)
    kmax = dist.max_degree
    accepted = 0
    tables = []
    done = 0
    while done < n_trials:
        R = min(batch, n_trials - done)
        U = u_rng.random((R, length))
        Z = sample_offspring_array(dist, z_rng, R * (length + 1)).reshape(R, length + 1)
        pending = [(U, Z)]
        while pending:
            U, Z = pending.pop()
            out = simulate_batch(U, Z, params, kmax)
            y = out["y"]
            conf, und = regen_masks(y, config.mode, margin)
            status, tau = first_regen_rows(y, config.mode, margin, min_time=1)
            holds = conf[:, 0]
            fails = ~conf[:, 0] & ~und[:, 0]
            settled = fails | (holds & (status == FOUND))
            take = holds & (status == FOUND)
            accepted += int(take.sum())
            if take.any():
                rows = np.flatnonzero(take)
                Ls = U.shape[1] + 1
                flat = _flat_trajectory(params, U[rows], Z[rows], {k: v[rows] for k, v in out.items()})
                starts = np.arange(rows.size, dtype=np.int64) * Ls
                ends = starts + tau[rows]
                da = flat.depth_beta.astype(np.int64)
                db = flat.depth_beta_eps.astype(np.int64)
                seg = SegmentTable(starts, ends, da[ends] - da[starts], db[ends] - db[starts])
                tables.append(classify_table(seg, flat))
            if not settled.all():
                rest = np.flatnonzero(~settled)
                pending.append(_extend(U[rest], Z[rest], u_rng, z_rng, dist, U.shape[1]))
        done += R
    summaries = SummaryTable.concat(tables) if tables else SummaryTable.empty()
    return ConditionedSample(n_trials, accepted, summaries)


@dataclass
class YSample:
    """Unconditioned runs of the integer walk alone."""

    zero_sr: np.ndarray  # bool per trial
    tau: np.ndarray      # first regeneration time >= 0
    b_count: np.ndarray  # back steps in [1, tau]

    @property
    def acceptance(self) -> float:
        return float(self.zero_sr.mean())

    def unconditioned(self) -> UnconditionedB:
        return UnconditionedB(self.b_count, self.tau)


def sample_y(
    y_bias: float,
    n_trials: int,
    seed,
    config: RegenConfig = RegenConfig(),
    length: int = 256,
    batch: int = 20000,
) -> YSample:
    """Fresh runs of Y (back step iff U <= 1/(y_bias + 1)), extended until settled."""
    rng = np.random.default_rng(seed)
    q = 1.0 / (y_bias + 1.0)
    margin = config.resolve_margin(y_bias)
    zero_sr, taus, bs = [], [], []
    done = 0
    while done < n_trials:
        R = min(batch, n_trials - done)
        U = rng.random((R, length))
        order = np.arange(R)
        res_zero = np.zeros(R, dtype=bool)
        res_tau = np.zeros(R, dtype=np.int64)
        res_b = np.zeros(R, dtype=np.int64)
        while order.size:
            steps = np.where(U <= q, -1, 1).astype(np.int64)
            y = np.zeros((U.shape[0], U.shape[1] + 1), dtype=np.int64)
            np.cumsum(steps, axis=1, out=y[:, 1:])
            conf, und = regen_masks(y, config.mode, margin)
            status, tau = first_regen_rows(y, config.mode, margin, min_time=0)
            settled = (status == FOUND) & (conf[:, 0] | ~und[:, 0])
            idx = np.flatnonzero(settled)
            res_zero[order[idx]] = conf[idx, 0]
            res_tau[order[idx]] = tau[idx]
            back = np.concatenate([np.zeros((idx.size, 1), np.int64),
                                   np.cumsum(steps[idx] < 0, axis=1)], axis=1)
            res_b[order[idx]] = back[np.arange(idx.size), tau[idx]]
            rest = np.flatnonzero(~settled)
            order = order[rest]
            if rest.size:
                U = np.hstack([U[rest], rng.random((rest.size, U.shape[1]))])
        zero_sr.append(res_zero)
        taus.append(res_tau)
        bs.append(res_b)
        done += R
    return YSample(np.concatenate(zero_sr), np.concatenate(taus), np.concatenate(bs))


def zero_sr_acceptance(beta: float, n_trials: int, seed, config: RegenConfig = RegenConfig(), d: int = 1) -> Estimate:
    """Fraction of fresh integer-walk runs on which time 0 is a regeneration."""
    s = sample_y(d * beta, n_trials, seed, config)
    p = s.acceptance
    return Estimate(p, float(np.sqrt(p * (1 - p) / n_trials)), n_trials, "rejection-0SR")


def stream_for(master_seed: int, index: int, dist: OffspringDistribution) -> RandomnessStream:
    return RandomnessStream(replica_seed(master_seed, index), dist)
