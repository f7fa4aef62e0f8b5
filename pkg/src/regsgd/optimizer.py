"""Regularized SGD, regularized GD and plain SGD.

One update reads::

    X_k = X_{k-1} - alpha_k * (grad f(X_{k-1}) + lambda_k X_{k-1} + D_k)

``D_k`` is the sampling error of the block estimator plus injected noise.
``REG_GD`` sets ``D_k = 0``; ``VANILLA_SGD`` sets ``lambda_k = 0``.

Replicas of one Monte Carlo run are advanced together as a ``(R, d)`` stack.
Each replica owns its random streams, so its path does not depend on the
other replicas; only the floating point summation order of the shared
matrix products may change with the group size, which is why
:func:`monte_carlo` always uses groups of :data:`GROUP_SIZE`.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .noise import BATCH, INIT, NOISE, NoiseKind, NoiseModel, RngStream, noise_scale
from .oracles import OracleError, make_oracle
from .problems import LinearProblem, Objective
from .schedules import PolynomialSchedule, schedule_arrays

__all__ = [
    "Variant",
    "OptimizerConfig",
    "Trajectory",
    "DivergenceError",
    "recording_points",
    "run",
    "run_replicas",
    "monte_carlo",
    "GROUP_SIZE",
]

GROUP_SIZE = 32
GEOMETRIC_RATIO = 1.05
_CHUNK_FLOATS = 1 << 20  # pre-drawn random numbers per replica group
THREADS_ENV = "REG_DESCENT_THREADS"


class Variant(str, enum.Enum):
    REG_SGD = "REG_SGD"
    REG_GD = "REG_GD"
    VANILLA_SGD = "VANILLA_SGD"


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings shared by all replicas of a run.

    Parameters
    ----------
    schedule : PolynomialSchedule
    noise : NoiseModel
        Injected gradient noise; ignored by ``REG_GD``.
    n_iterations : int
        Number of updates ``N``.
    x0 : None, "zero", "gaussian" or array
        Initial iterate.  ``"gaussian"`` draws a standard normal vector from
        the replica's own stream.
    record_stride : int or None
        Record every ``record_stride``-th iterate; ``None`` records at
        ``k = round(1.05**j)``.  ``k = 0`` and ``k = N`` are always recorded.
    variant : Variant
    batch_size : int
        Blocks per step on linear problems; ignored by ``REG_GD``.
    keep_iterates : bool
        Store every recorded iterate.
    """

    schedule: PolynomialSchedule
    noise: NoiseModel = NoiseModel()
    n_iterations: int = 1000
    x0: object = None
    record_stride: int | None = None
    variant: Variant = Variant.REG_SGD
    batch_size: int = 1
    keep_iterates: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if int(self.n_iterations) != self.n_iterations or self.n_iterations < 0:
            raise ValueError("n_iterations must be a non-negative integer")
        if self.record_stride is not None and self.record_stride < 1:
            raise ValueError("record_stride must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")

    @property
    def effective_schedule(self) -> PolynomialSchedule:
        if self.variant is Variant.VANILLA_SGD:
            return replace(self.schedule, c_lambda=0.0)
        return self.schedule

    @property
    def effective_noise(self) -> NoiseModel:
        return NoiseModel() if self.variant is Variant.REG_GD else self.noise


@dataclass
class Trajectory:
    """Diagnostics at the recorded iterations.

    Quantities that cannot be computed (no oracle, ``lambda = 0``) are NaN.
    ``max_norm`` is the running maximum of ``|X_j|`` over all ``j <= k``,
    not only over recorded ``j``.
    """

    iterations: np.ndarray
    alpha: np.ndarray
    lam: np.ndarray
    f_gap: np.ndarray
    dist_sq_to_xstar: np.ndarray
    dist_sq_to_xlambda: np.ndarray
    energy: np.ndarray
    max_norm: np.ndarray
    final_iterate: np.ndarray | None = None
    iterates: list | None = None
    diverged_at: int | None = None
    last_finite_iterate: np.ndarray | None = None
    diverged_replicas: list = field(default_factory=list)
    n_replicas: int = 1

    FIELDS = ("f_gap", "dist_sq_to_xstar", "dist_sq_to_xlambda", "energy", "max_norm")

    def __len__(self):
        return len(self.iterations)

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None


class DivergenceError(RuntimeError):
    """An iterate became non-finite."""

    def __init__(self, k: int, last_finite_iterate: np.ndarray, trajectory: Trajectory | None = None):
        super().__init__(f"iterate became non-finite at k={k}")
        self.k = k
        self.last_finite_iterate = last_finite_iterate
        self.trajectory = trajectory


def recording_points(n_iterations: int, stride: int | None = None,
                     ratio: float = GEOMETRIC_RATIO) -> np.ndarray:
    """Iterations to record: ``0``, the stride/geometric grid, and ``N``."""
    N = int(n_iterations)
    if stride is not None:
        pts = np.arange(0, N + 1, stride)
    else:
        jmax = int(np.ceil(np.log(max(N, 1)) / np.log(ratio))) + 1
        pts = np.rint(ratio ** np.arange(jmax + 1)).astype(np.int64)
        pts = pts[pts <= N]
    return np.unique(np.concatenate([[0], pts, [N]])).astype(np.int64)


# -- engine -----------------------------------------------------------------------

def _initial_stack(problem: Objective, cfg: OptimizerConfig, streams) -> np.ndarray:
    d = problem.dimension
    x0 = cfg.x0
    if x0 is None or (isinstance(x0, str) and x0 == "zero"):
        return np.zeros((len(streams), d))
    if isinstance(x0, str) and x0 == "gaussian":
        return np.stack([s.generator(INIT).standard_normal(d) for s in streams])
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape != (d,):
        raise ValueError(f"x0 has length {x0.size}, problem dimension is {d}")
    return np.tile(x0, (len(streams), 1))


def _reference(problem: Objective, oracle):
    x_star = getattr(oracle, "x_star", None)
    f_star = getattr(oracle, "f_star", None)
    if f_star is None:
        f_star = problem.metadata.get("f_star")
    return x_star, f_star


class _Recorder:
    def __init__(self, problem, oracle, points, alpha, lam, R, keep):
        self.problem, self.oracle = problem, oracle
        self.x_star, self.f_star = _reference(problem, oracle)
        self.points = points
        self.alpha, self.lam = alpha, lam  # indexed by k - 1, length N + 1
        n = len(points)
        self.data = {f: np.full((R, n), np.nan) for f in Trajectory.FIELDS}
        self.iterates = [[] for _ in range(R)] if keep else None
        self.count = np.zeros(R, dtype=np.int64)

    def record(self, j: int, k: int, X: np.ndarray, running_max: np.ndarray, rows: np.ndarray):
        X = X[rows]
        d = self.data
        if self.f_star is not None:
            d["f_gap"][rows, j] = self.problem.value(X) - self.f_star
        if self.x_star is not None:
            diff = X - self.x_star
            d["dist_sq_to_xstar"][rows, j] = np.einsum("rd,rd->r", diff, diff)
        lam_next = self.lam[k]
        if self.oracle is not None and lam_next > 0:
            xl = self.oracle.x_lambda(lam_next)
            diff = X - xl
            d["dist_sq_to_xlambda"][rows, j] = np.einsum("rd,rd->r", diff, diff)
            ref = self.oracle.f_lambda_min(lam_next)
            e = self.problem.value(X) + 0.5 * lam_next * np.einsum("rd,rd->r", X, X) - ref
            tol = 1e-12 * max(1.0, abs(ref))
            if np.any(e < -tol):
                raise OracleError(f"negative energy {e.min():.3e} at k={k}")
            d["energy"][rows, j] = np.maximum(e, 0.0)
        d["max_norm"][rows, j] = running_max[rows]
        self.count[rows] = j + 1
        if self.iterates is not None:
            for x, r in zip(X, np.flatnonzero(rows)):
                self.iterates[r].append(x.copy())

    def trajectories(self, X_final, diverged_at, last_finite):
        k = self.points
        alpha = np.where(k >= 1, self.alpha[np.maximum(k - 1, 0)], np.nan)
        lam = np.where(k >= 1, self.lam[np.maximum(k - 1, 0)], np.nan)
        out = []
        for r in range(X_final.shape[0]):
            n = self.count[r]
            fields = {f: self.data[f][r, :n].copy() for f in Trajectory.FIELDS}
            t = Trajectory(k[:n].copy(), alpha[:n].copy(), lam[:n].copy(), **fields)
            if diverged_at[r] >= 0:
                t.diverged_at = int(diverged_at[r])
                t.last_finite_iterate = last_finite[r].copy()
            else:
                t.final_iterate = X_final[r].copy()
            if self.iterates is not None:
                t.iterates = self.iterates[r]
            out.append(t)
        return out


def run_replicas(problem: Objective, config: OptimizerConfig, streams, oracle=None) -> list[Trajectory]:
    """Advance several replicas together and return one trajectory each.

    Diverged replicas are frozen at their last finite iterate; their
    trajectory stops at the last record before divergence and carries
    ``diverged_at``.
    """
    cfg = config
    streams = list(streams)
    R, d = len(streams), problem.dimension
    N = int(cfg.n_iterations)
    sched = cfg.effective_schedule
    noise = cfg.effective_noise

    is_linear = isinstance(problem, LinearProblem)
    use_blocks = is_linear and cfg.variant is not Variant.REG_GD and cfg.batch_size < problem.n_blocks
    if is_linear and cfg.batch_size > problem.n_blocks and cfg.variant is not Variant.REG_GD:
        raise ValueError(f"batch_size {cfg.batch_size} exceeds the {problem.n_blocks} blocks")
    use_noise = noise.kind is not NoiseKind.NONE and (noise.sigma > 0 or noise.needs_gap)
    _, f_star = _reference(problem, oracle)
    if noise.needs_gap and f_star is None:
        raise ValueError("ABC_SCALED noise needs f(x*) from an oracle or problem metadata")

    ks = sched.k_start + np.arange(N + 1)
    alpha, lam = schedule_arrays(sched, ks)
    points = recording_points(N, cfg.record_stride)
    rec = _Recorder(problem, oracle, points, alpha, lam, R, cfg.keep_iterates)

    X = _initial_stack(problem, cfg, streams)
    running_max = np.sqrt(np.einsum("rd,rd->r", X, X))
    diverged_at = np.full(R, -1, dtype=np.int64)
    active = np.ones(R, dtype=bool)
    all_rows = np.ones(R, dtype=bool)
    rec.record(0, 0, X, running_max, all_rows)
    next_j = 1

    noise_gens = [s.generator(NOISE) for s in streams] if use_noise else None
    batch_gens = [s.generator(BATCH) for s in streams] if use_blocks else None
    per_step = (d if use_noise else 0) + (problem.n_blocks if use_blocks else 0)
    chunk = int(max(1, min(4096, _CHUNK_FLOATS // max(1, per_step * R))))
    b = cfg.batch_size

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, N + 1):
            i = (k - 1) % chunk
            if i == 0:
                m = min(chunk, N - k + 1)
                if use_noise:
                    Z = np.stack([g.standard_normal((m, d)) for g in noise_gens])
                if use_blocks:
                    batches = np.stack([np.argsort(g.random((m, problem.n_blocks)), axis=1)[:, :b]
                                        for g in batch_gens])
            a, l = alpha[k - 1], lam[k - 1]
            if use_blocks:
                grad = problem.block_gradient_stack(X, batches[:, i, :])
            else:
                grad = problem.full_gradient(X)
            if use_noise:
                if noise.needs_gap:
                    scale = noise_scale(noise, problem.value(X) - f_star, d)[:, None]
                else:
                    scale = noise.sigma
                Xn = X - a * (grad + l * X + scale * Z[:, i, :])
            else:
                Xn = X - a * (grad + l * X)

            # a NaN/Inf entry, or a norm that overflows, makes the norm non-finite
            nrm = np.sqrt(np.einsum("rd,rd->r", Xn, Xn))
            ok = np.isfinite(nrm)
            if not ok.all() or not active.all():
                fresh = active & ~ok
                diverged_at[fresh] = k
                active &= ok
                Xn[~active] = X[~active]
                nrm[~active] = 0.0
            X = Xn
            np.maximum(running_max, nrm, out=running_max)
            if next_j < len(points) and points[next_j] == k:
                if active.any():
                    rec.record(next_j, k, X, running_max, active)
                next_j += 1
    return rec.trajectories(X, diverged_at, X)


def run(problem: Objective, config: OptimizerConfig, stream: RngStream, oracle=None) -> Trajectory:
    """Run a single replica; raises :class:`DivergenceError` on a non-finite iterate."""
    traj = run_replicas(problem, config, [stream], oracle)[0]
    if traj.diverged:
        raise DivergenceError(traj.diverged_at, traj.last_finite_iterate, traj)
    return traj


def _mean_trajectory(trajs: list[Trajectory], diverged: list[int]) -> Trajectory:
    ok = [t for i, t in enumerate(trajs) if i not in diverged]
    ref = max(trajs, key=len)
    n = len(ref)
    if ok:
        fields = {f: np.mean([getattr(t, f) for t in ok], axis=0) for f in Trajectory.FIELDS}
        fields["max_norm"] = np.max([t.max_norm for t in ok], axis=0)
        final = np.mean([t.final_iterate for t in ok], axis=0)
    else:
        fields = {f: np.full(n, np.nan) for f in Trajectory.FIELDS}
        final = None
    mean = Trajectory(ref.iterations.copy(), ref.alpha.copy(), ref.lam.copy(), **fields)
    mean.final_iterate = final
    mean.diverged_replicas = list(diverged)
    mean.n_replicas = len(trajs)
    return mean


def _thread_count(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def monte_carlo(problem: Objective, config: OptimizerConfig, n_replicas: int, master_seed: int,
                oracle="auto", threads: int | None = None) -> tuple[Trajectory, list[Trajectory]]:
    """Run independent replicas and average their diagnostics.

    Replica ``r`` uses ``RngStream(master_seed, r)``.  The mean trajectory
    averages every diagnostic over the replicas that did not diverge (the
    indices of the others are in ``mean.diverged_replicas``) and takes the
    maximum of ``max_norm``.  ``mean.final_iterate`` is the average final
    iterate.  Pass ``oracle=None`` to skip oracle diagnostics.

    Groups of :data:`GROUP_SIZE` replicas are dispatched to at most
    ``threads`` workers (default: ``$REG_DESCENT_THREADS`` or the CPU count);
    the grouping does not depend on the worker count, so results are
    identical for every thread setting.
    """
    if n_replicas < 1:
        raise ValueError("n_replicas must be >= 1")
    if isinstance(oracle, str) and oracle == "auto":
        oracle = make_oracle(problem)
    streams = [RngStream(master_seed, r) for r in range(n_replicas)]
    groups = [streams[i:i + GROUP_SIZE] for i in range(0, n_replicas, GROUP_SIZE)]
    workers = min(_thread_count(threads), len(groups))
    if workers == 1:
        results = [run_replicas(problem, config, g, oracle) for g in groups]
    else:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda g: run_replicas(problem, config, g, oracle), groups))
    trajs = [t for group in results for t in group]
    diverged = [i for i, t in enumerate(trajs) if t.diverged]
    return _mean_trajectory(trajs, diverged), trajs
