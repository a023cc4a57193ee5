"""Coupling of the beta-walk, the (beta+eps)-walk and the integer walk Y.

A single uniform U_n drives all three walks at step n. The two tree walks
live on separate lazily grown trees; a site first visited at step n gets
Z_n children, so while the walks agree their trees agree too.

Two implementations are provided: :func:`coupled_step` is a plain-Python
stepper meant for inspection and tests, :func:`run_trajectory` runs the
compiled kernel over whole arrays. They consume the same streams and
produce identical paths.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import _kernel
from .bounds import pqeps
from .offspring import OffspringDistribution, sample_offspring_array

MAX_STEPS = 2**27


class CapacityError(RuntimeError):
    """A run would exceed the configured memory or index capacity."""


@dataclass(frozen=True)
class BiasParams:
    """Bias pair (beta, beta + eps), plus the degree ``d`` that sets Y's bias.

    Y steps back iff U <= 1/(d beta + 1). ``d`` must not exceed the minimal
    offspring degree, otherwise Y no longer lower-bounds the tree walks.
    """

    beta: float
    eps: float
    d: int = 1

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.eps >= 0:
            raise ValueError("eps must be nonnegative")
        if self.d < 1:
            raise ValueError("d must be >= 1")

    @property
    def q_y(self) -> float:
        return 1.0 / (self.d * self.beta + 1.0)

    @property
    def y_bias(self) -> float:
        return self.d * self.beta


@dataclass(frozen=True)
class CouplingPartition:
    """How one uniform is split at a vertex with ``k`` children.

    Targets are encoded as 0 for the parent and i in 1..k for child i.
    Intervals are (lo, hi) pairs; endpoints only matter on a null set.
    """

    k: int
    beta: float
    eps: float
    p: float = field(init=False)
    q: float = field(init=False)
    e: float = field(init=False)

    def __post_init__(self) -> None:
        p, q, e = pqeps(self.k, self.beta, self.eps)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "e", e)

    @property
    def parent_beta(self) -> tuple[float, float]:
        return (0.0, self.q)

    @property
    def parent_beta_eps(self) -> tuple[float, float]:
        return (self.e, self.q)

    @property
    def child_intervals(self) -> list[tuple[float, float]]:
        """Shared by both walks: child i owns (1 - i p, 1 - (i-1) p]."""
        return [(1.0 - i * self.p, 1.0 - (i - 1) * self.p) for i in range(1, self.k + 1)]

    @property
    def decoupling_intervals(self) -> list[tuple[float, float]]:
        """Only the (beta+eps)-walk uses these: [(j-1) e/k, j e/k) -> child j."""
        w = self.e / self.k
        return [((j - 1) * w, j * w) for j in range(1, self.k + 1)]

    def measures_beta(self) -> tuple[float, np.ndarray]:
        """(parent mass, per-child masses) for the beta-walk."""
        lo, hi = self.parent_beta
        return hi - lo, np.array([hi - lo for lo, hi in self.child_intervals])

    def measures_beta_eps(self) -> tuple[float, np.ndarray]:
        lo, hi = self.parent_beta_eps
        child = np.array([hi - lo for lo, hi in self.child_intervals])
        child += np.array([hi - lo for lo, hi in self.decoupling_intervals])
        return hi - lo, child

    def target_beta(self, u):
        u = np.asarray(u, dtype=float)
        child = np.clip(np.ceil((1.0 - u) / self.p), 1, self.k).astype(np.int64)
        return np.where(u <= self.q, 0, child)

    def target_beta_eps(self, u):
        u = np.asarray(u, dtype=float)
        shared = self.target_beta(u)
        if self.e == 0.0:
            return shared
        split = np.clip(np.floor(u * self.k / self.e) + 1, 1, self.k).astype(np.int64)
        return np.where(u < self.e, split, shared)


def make_partition(k: int, params: BiasParams) -> CouplingPartition:
    if k < 1:
        raise ValueError("k must be >= 1")
    return CouplingPartition(k, params.beta, params.eps)


def root_child(m: int, u):
    """Child index (1..m) chosen at a root with m children: equal split of [0, 1)."""
    u = np.asarray(u, dtype=float)
    return np.minimum(np.floor(u * m), m - 1).astype(np.int64) + 1


class LazyTree:
    """Tree grown on demand; vertex 0 is the root.

    Child counts are fixed when a vertex is created; child ids are allocated
    the first time the walk enters that child.
    """

    def __init__(self, root_children: int):
        if root_children < 1:
            raise ValueError("leafless tree: every vertex needs a child")
        self.parent: list[int] = [-1]
        self.nkids: list[int] = [root_children]
        self.depth: list[int] = [0]
        self.children: list[list[int | None]] = [[None] * root_children]

    def __len__(self) -> int:
        return len(self.parent)

    def child(self, v: int, i: int, offspring: int) -> tuple[int, bool]:
        """Id of the i-th child (1-based) of v, creating it with ``offspring`` children."""
        slot = self.children[v]
        c = slot[i - 1]
        if c is not None:
            return c, False
        if offspring < 1:
            raise ValueError("leafless tree: every vertex needs a child")
        c = len(self.parent)
        self.parent.append(v)
        self.nkids.append(offspring)
        self.depth.append(self.depth[v] + 1)
        self.children.append([None] * offspring)
        slot[i - 1] = c
        return c, True


class RandomnessStream:
    """The uniforms U_1, U_2, ... and offspring draws Z_0, Z_1, ...

    Both are produced by independent generators spawned from one seed
    sequence, in blocks, so that step-by-step reads and bulk reads see the
    same numbers.
    """

    block = 4096

    def __init__(self, seed, dist: OffspringDistribution):
        if isinstance(seed, np.random.SeedSequence):
            ss = seed
        else:
            ss = np.random.SeedSequence(seed)
        self.seed_entropy = ss.entropy
        self.spawn_key = ss.spawn_key
        u_ss, z_ss = ss.spawn(2)
        self._u_rng = np.random.Generator(np.random.PCG64(u_ss))
        self._z_rng = np.random.Generator(np.random.PCG64(z_ss))
        self.dist = dist
        self._u = np.empty(0)
        self._z = np.empty(0, dtype=np.int32)

    def _shortfall(self, have: int, n: int) -> int:
        return -(-(n - have) // self.block) * self.block

    def _fill_u(self, n: int) -> None:
        if self._u.size < n:
            more = self._u_rng.random(self._shortfall(self._u.size, n))
            self._u = np.concatenate([self._u, more])

    def _fill_z(self, n: int) -> None:
        if self._z.size < n:
            more = sample_offspring_array(self.dist, self._z_rng, self._shortfall(self._z.size, n))
            self._z = np.concatenate([self._z, more])

    def u(self, n: int) -> float:
        """U_n, n >= 1."""
        if n < 1:
            raise IndexError("uniforms are indexed from 1")
        self._fill_u(n)
        return float(self._u[n - 1])

    def z(self, n: int) -> int:
        """Z_n, the child count given to any site discovered at step n."""
        self._fill_z(n + 1)
        return int(self._z[n])

    def arrays(self, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
        """(U_1..U_n, Z_0..Z_n) as arrays."""
        self._fill_u(n_steps)
        self._fill_z(n_steps + 1)
        return self._u[:n_steps].copy(), self._z[: n_steps + 1].copy()


@dataclass(frozen=True)
class CoupledState:
    time: int
    vertex_beta: int
    depth_beta: int
    vertex_beta_eps: int
    depth_beta_eps: int
    y: int
    decoupled: bool = False
    delta: int | None = None

    @property
    def gap(self) -> int:
        return self.depth_beta_eps - self.depth_beta


def initial_state() -> CoupledState:
    return CoupledState(0, 0, 0, 0, 0, 0)


def new_trees(stream: RandomnessStream) -> tuple[LazyTree, LazyTree]:
    z0 = stream.z(0)
    return LazyTree(z0), LazyTree(z0)


def _move(tree: LazyTree, v: int, u: float, params: BiasParams, biased_more: bool, z: int) -> int:
    k = tree.nkids[v]
    if v == 0:
        target = int(root_child(k, u))
    else:
        part = make_partition(k, params)
        target = int(part.target_beta_eps(u) if biased_more else part.target_beta(u))
    if target == 0:
        return tree.parent[v]
    return tree.child(v, target, z)[0]


def coupled_step(
    state: CoupledState,
    stream: RandomnessStream,
    trees: tuple[LazyTree, LazyTree],
    params: BiasParams,
) -> CoupledState:
    """Advance all three walks by one step using U_{n+1}; grows ``trees`` in place."""
    n = state.time + 1
    u = stream.u(n)
    z = stream.z(n)
    ta, tb = trees
    va = _move(ta, state.vertex_beta, u, params, False, z)
    vb = _move(tb, state.vertex_beta_eps, u, params, True, z)
    dy = -1 if u <= params.q_y else 1
    decoupled, delta = state.decoupled, state.delta
    if not decoupled and va != vb:
        decoupled, delta = True, n
    return CoupledState(
        time=n,
        vertex_beta=va,
        depth_beta=ta.depth[va],
        vertex_beta_eps=vb,
        depth_beta_eps=tb.depth[vb],
        y=state.y + dy,
        decoupled=decoupled,
        delta=delta,
    )


def root_step(
    state: CoupledState,
    stream: RandomnessStream,
    trees: tuple[LazyTree, LazyTree],
    params: BiasParams,
) -> CoupledState:
    """A step taken while at least one walker sits at its root.

    Walkers at a root go to the child picked by :func:`root_child`; Y
    still uses its own threshold and may step down.
    """
    if state.vertex_beta != 0 and state.vertex_beta_eps != 0:
        raise ValueError("root_step requires a walker at the root")
    return coupled_step(state, stream, trees, params)


@dataclass(eq=False)
class CoupledTrajectory:
    """Per-step record of a coupled run.

    Arrays of length n + 1 are indexed by time (index t = state after step
    t); ``u`` has length n with ``u[t-1] = U_t``.
    """

    params: BiasParams
    u: np.ndarray
    z: np.ndarray
    y: np.ndarray
    depth_beta: np.ndarray
    depth_beta_eps: np.ndarray
    kids_beta: np.ndarray
    kids_beta_eps: np.ndarray
    vertex_beta: np.ndarray
    vertex_beta_eps: np.ndarray
    new_beta: np.ndarray
    new_beta_eps: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.u.size

    def depth(self, walk: str) -> np.ndarray:
        if walk in ("beta", "a"):
            return self.depth_beta
        if walk in ("beta_eps", "b"):
            return self.depth_beta_eps
        if walk == "y":
            return self.y
        raise ValueError(f"unknown walk {walk!r}")

    @cached_property
    def gap(self) -> np.ndarray:
        return self.depth_beta_eps.astype(np.int64) - self.depth_beta

    @cached_property
    def back_steps(self) -> np.ndarray:
        """Boolean per step t = 1..n: U_t <= q_y (Y steps back)."""
        return np.diff(self.y) < 0

    @cached_property
    def split_steps(self) -> np.ndarray:
        """Steps t at which the two tree walks moved in opposite directions."""
        da = np.diff(self.depth_beta)
        db = np.diff(self.depth_beta_eps)
        return np.flatnonzero(da != db) + 1

    @property
    def delta(self) -> int | None:
        """First step at which the walkers occupy different vertices."""
        diff = np.flatnonzero(self.vertex_beta != self.vertex_beta_eps)
        return int(diff[0]) if diff.size else None

    def record(self, t: int) -> dict:
        """Step record for step t >= 1."""
        return {
            "t": t,
            "u": float(self.u[t - 1]),
            "dy": int(self.y[t] - self.y[t - 1]),
            "move_beta": int(self.depth_beta[t] - self.depth_beta[t - 1]),
            "move_beta_eps": int(self.depth_beta_eps[t] - self.depth_beta_eps[t - 1]),
            "depth_beta": int(self.depth_beta[t]),
            "depth_beta_eps": int(self.depth_beta_eps[t]),
            "new_beta": bool(self.new_beta[t]),
            "new_beta_eps": bool(self.new_beta_eps[t]),
            "z": int(self.z[t]),
        }

    def state(self, t: int) -> CoupledState:
        d = self.delta
        decoupled = d is not None and d <= t
        return CoupledState(
            time=t,
            vertex_beta=int(self.vertex_beta[t]),
            depth_beta=int(self.depth_beta[t]),
            vertex_beta_eps=int(self.vertex_beta_eps[t]),
            depth_beta_eps=int(self.depth_beta_eps[t]),
            y=int(self.y[t]),
            decoupled=decoupled,
            delta=d if decoupled else None,
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        for name in ("u", "z", "y", "depth_beta", "depth_beta_eps", "kids_beta",
                     "kids_beta_eps", "vertex_beta", "vertex_beta_eps", "new_beta",
                     "new_beta_eps"):
            h.update(np.ascontiguousarray(getattr(self, name)).tobytes())
        return h.hexdigest()


def partition_tables(params: BiasParams, kmax: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """q_k, p_k (for beta) and eps_k indexed by k = 0..kmax (index 0 unused)."""
    q = np.zeros(kmax + 1)
    p = np.zeros(kmax + 1)
    e = np.zeros(kmax + 1)
    for k in range(1, kmax + 1):
        p[k], q[k], e[k] = pqeps(k, params.beta, params.eps)
    return q, p, e


def simulate_batch(U: np.ndarray, Z: np.ndarray, params: BiasParams, kmax: int) -> dict:
    """Run the kernel on rows of uniforms and offspring draws.

    ``U`` has shape (R, L) and ``Z`` shape (R, L + 1). Returns the output
    arrays keyed by field name, each shaped (R, L + 1).
    """
    U = np.ascontiguousarray(U, dtype=np.float64)
    Z = np.ascontiguousarray(Z, dtype=np.int32)
    if U.ndim != 2 or Z.shape != (U.shape[0], U.shape[1] + 1):
        raise ValueError("U must be (R, L) and Z must be (R, L + 1)")
    if U.shape[1] > MAX_STEPS:
        raise CapacityError(f"{U.shape[1]} steps exceeds the per-run cap {MAX_STEPS}")
    shape = (U.shape[0], U.shape[1] + 1)
    out = {
        "y": np.empty(shape, np.int32),
        "depth_beta": np.empty(shape, np.int32),
        "depth_beta_eps": np.empty(shape, np.int32),
        "kids_beta": np.empty(shape, np.int32),
        "kids_beta_eps": np.empty(shape, np.int32),
        "vertex_beta": np.empty(shape, np.int32),
        "vertex_beta_eps": np.empty(shape, np.int32),
        "new_beta": np.empty(shape, np.bool_),
        "new_beta_eps": np.empty(shape, np.bool_),
    }
    q, p, e = partition_tables(params, kmax)
    status = _kernel.simulate_rows(U, Z, q, p, e, params.q_y, *out.values())
    if status != _kernel.OK:
        raise CapacityError("tree storage exceeded the index capacity")
    return out


def run_trajectory(
    dist: OffspringDistribution,
    params: BiasParams,
    n_steps: int,
    seed=None,
    stream: RandomnessStream | None = None,
) -> CoupledTrajectory:
    """Run the coupled walks for ``n_steps`` steps from the root.

    The result depends only on (dist, params, n_steps, seed).
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if n_steps > MAX_STEPS:
        raise CapacityError(f"{n_steps} steps exceeds the per-run cap {MAX_STEPS}")
    if params.d > dist.min_degree:
        raise ValueError("Y's degree d exceeds the minimal offspring degree")
    if stream is None:
        stream = RandomnessStream(seed, dist)
    U, Z = stream.arrays(n_steps)
    out = simulate_batch(U[None, :], Z[None, :], params, dist.max_degree)
    return CoupledTrajectory(params=params, u=U, z=Z, **{k: v[0] for k, v in out.items()})


def step_through(
    dist: OffspringDistribution, params: BiasParams, n_steps: int, seed=None
) -> list[CoupledState]:
    """Reference run built from :func:`coupled_step`; slow, for checks."""
    stream = RandomnessStream(seed, dist)
    trees = new_trees(stream)
    states = [initial_state()]
    for _ in range(n_steps):
        states.append(coupled_step(states[-1], stream, trees, params))
    return states


def with_eps(params: BiasParams, eps: float) -> BiasParams:
    return replace(params, eps=eps)
