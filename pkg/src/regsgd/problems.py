"""Objectives and the three experiment problems.

Linear problems use ``f(x) = 1/2 |Ax - y|^2``.  Rows of ``A`` are split into
blocks; :func:`stochastic_gradient` samples blocks and rescales so that the
estimate is unbiased for the gradient of this one global ``f``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "Objective",
    "LinearProblem",
    "StochasticGradientEstimate",
    "toy_problem",
    "ode_operator",
    "ode_problem",
    "ray_intersections",
    "radon_matrix",
    "radon_problem",
    "phantom",
    "random_linear_problem",
    "diagonal_problem",
    "stochastic_gradient",
    "top_singular_value_sq",
]


class Objective:
    """A convex, L-smooth objective with full gradient.

    ``value`` and ``full_gradient`` accept a point of shape ``(d,)`` or a stack
    of points of shape ``(R, d)``.
    """

    def __init__(
        self,
        dimension: int,
        value: Callable,
        gradient: Callable,
        smoothness_L: float,
        metadata: dict | None = None,
        name: str = "objective",
    ):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        if not smoothness_L > 0:
            raise ValueError("smoothness_L must be positive")
        self.dimension = int(dimension)
        self._value = value
        self._gradient = gradient
        self.smoothness_L = float(smoothness_L)
        self.metadata = dict(metadata or {})
        self.name = name

    def value(self, x):
        return self._value(np.asarray(x, dtype=float))

    def full_gradient(self, x):
        return self._gradient(np.asarray(x, dtype=float))

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r}, d={self.dimension})"


def top_singular_value_sq(A) -> float:
    """``sigma_max(A)^2`` by Lanczos on ``A^T A`` (dense eigensolver when small)."""
    K, d = A.shape
    if min(K, d) <= 32:
        M = A.toarray() if sp.issparse(A) else np.asarray(A)
        G = M @ M.T if K <= d else M.T @ M
        return float(max(np.linalg.eigvalsh(G)[-1], 0.0))
    op = spla.LinearOperator((d, d), matvec=lambda v: A.T @ (A @ v), dtype=float)
    v0 = np.ones(d) / np.sqrt(d)
    val = spla.eigsh(op, k=1, which="LA", v0=v0, tol=1e-14, return_eigenvectors=False)
    return float(val[0])


class LinearProblem(Objective):
    """Least squares ``1/2 |Ax - y|^2`` with a row partition into blocks."""

    def __init__(self, operator_A, data_y, block_partition=None, metadata=None, name="linear"):
        A = operator_A if sp.issparse(operator_A) else np.atleast_2d(np.asarray(operator_A, dtype=float))
        if sp.issparse(A):
            A = sp.csr_matrix(A, dtype=float)
        y = np.asarray(data_y, dtype=float).ravel()
        K, d = A.shape
        if y.shape != (K,):
            raise ValueError(f"data_y has length {y.size}, operator has {K} rows")
        if block_partition is None:
            block_partition = [[i] for i in range(K)]
        blocks = [np.asarray(b, dtype=np.intp).ravel() for b in block_partition]
        flat = np.concatenate(blocks) if blocks else np.array([], dtype=np.intp)
        if flat.size != K or not np.array_equal(np.sort(flat), np.arange(K)):
            raise ValueError("block_partition must split the rows into disjoint, exhaustive blocks")
        if any(b.size == 0 for b in blocks):
            raise ValueError("blocks must be non-empty")

        self.operator_A = A
        self.data_y = y
        self.block_partition = blocks
        L = top_singular_value_sq(A)
        if L <= 0:
            L = np.finfo(float).tiny  # zero operator; any L works
        super().__init__(d, self._val, self._grad, L, metadata, name)

        # dense per-block stacks for the vectorized optimizer path
        sizes = {b.size for b in blocks}
        self._dense = A.toarray() if sp.issparse(A) else A
        self._equal_blocks = len(sizes) == 1
        if self._equal_blocks:
            self._block_rows = np.stack(blocks)
            self._block_mats = self._dense[self._block_rows]  # (n_blocks, rows, d)
            self._block_data = self.data_y[self._block_rows]

    @property
    def n_blocks(self) -> int:
        return len(self.block_partition)

    def _val(self, x):
        r = x @ self._dense.T - self.data_y
        return 0.5 * np.sum(r * r, axis=-1)

    def _grad(self, x):
        r = x @ self._dense.T - self.data_y
        return r @ self._dense

    def block_gradient_stack(self, X: np.ndarray, batches: np.ndarray) -> np.ndarray:
        """Unbiased block estimates for a stack of points.

        ``X`` has shape ``(R, d)`` and ``batches`` shape ``(R, b)`` of block
        ids; row ``r`` of the result equals
        ``stochastic_gradient(self, X[r], batches[r]).estimate`` up to
        summation order.
        """
        scale = self.n_blocks / batches.shape[1]
        if self._equal_blocks and batches.shape[1] == 1 and self._block_mats[0].size * X.shape[0] > 50_000:
            # large blocks: matrix-vector products on views, no gathered copy
            out = np.empty_like(X)
            for r, b in enumerate(batches[:, 0]):
                A_b = self._block_mats[b]
                out[r] = scale * ((A_b @ X[r] - self._block_data[b]) @ A_b)
            return out
        if self._equal_blocks:
            rows = self._block_rows[batches].reshape(batches.shape[0], -1)
            A_sel = self._dense[rows]
            res = np.einsum("rjd,rd->rj", A_sel, X) - self.data_y[rows]
            return scale * np.einsum("rjd,rj->rd", A_sel, res)
        out = np.empty_like(X)
        for r in range(X.shape[0]):
            rows = np.concatenate([self.block_partition[b] for b in batches[r]])
            A_b = self._dense[rows]
            out[r] = scale * (A_b.T @ (A_b @ X[r] - self.data_y[rows]))
        return out


@dataclass
class StochasticGradientEstimate:
    estimate: np.ndarray
    block_ids: tuple[int, ...]
    is_unbiased: bool = True

    @property
    def block_id(self) -> int:
        return self.block_ids[0]


def stochastic_gradient(prob: LinearProblem, x, batch) -> StochasticGradientEstimate:
    """``(n_blocks / |batch|) * sum_b A_b^T (A_b x - y_b)``.

    A batch covering every block returns the full gradient bit for bit.
    """
    batch = [int(b) for b in np.atleast_1d(batch)]
    if not batch:
        raise ValueError("batch must be non-empty")
    if len(set(batch)) != len(batch):
        raise ValueError("repeated block ids in batch")
    if min(batch) < 0 or max(batch) >= prob.n_blocks:
        raise ValueError(f"block ids must lie in [0, {prob.n_blocks})")
    x = np.asarray(x, dtype=float)
    if len(batch) == prob.n_blocks:
        return StochasticGradientEstimate(prob.full_gradient(x), tuple(batch))
    rows = np.concatenate([prob.block_partition[b] for b in batch])
    A_b = prob._dense[rows]
    g = (prob.n_blocks / len(batch)) * (A_b.T @ (A_b @ x - prob.data_y[rows]))
    return StochasticGradientEstimate(g, tuple(batch))


# -- toy -----------------------------------------------------------------------

def toy_problem() -> Objective:
    """``f(x1, x2) = 1/2 (x1 + x2 - 1)^2`` with closed-form solution curve."""

    def value(x):
        s = x[..., 0] + x[..., 1] - 1.0
        return 0.5 * s * s

    def gradient(x):
        s = x[..., 0] + x[..., 1] - 1.0
        return np.stack([s, s], axis=-1)

    def x_lambda(lam):
        return np.full(2, 1.0 / (2.0 + lam))

    meta = {
        "x_star": np.array([0.5, 0.5]),
        "f_star": 0.0,
        "x_lambda": x_lambda,
        "dist_to_xstar": lambda lam: lam / (np.sqrt(2.0) * (2.0 + lam)),
        "linear_form": (np.array([[1.0, 1.0]]), np.array([1.0])),
    }
    return Objective(2, value, gradient, 2.0, meta, name="toy")


# -- ODE inverse problem -------------------------------------------------------

def ode_operator(mesh_exponent: int):
    """Dirichlet finite-difference matrix of ``-d^2/ds^2 + Id`` on (0, 1).

    Mesh width ``2**-mesh_exponent``; unknowns sit at the interior nodes
    ``s_j = j * delta``, ``j = 1 .. 2**mesh_exponent - 1``.  Returns the
    sparse matrix and the node coordinates.
    """
    if mesh_exponent < 2:
        raise ValueError("mesh_exponent must be >= 2")
    n_cells = 2**mesh_exponent
    delta = 1.0 / n_cells
    n = n_cells - 1
    s = delta * np.arange(1, n_cells)
    main = np.full(n, 2.0 / delta**2 + 1.0)
    off = np.full(n - 1, -1.0 / delta**2)
    G = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    return G, s


def ode_ground_truth(s, rng_seed: int, n_terms: int = 100) -> np.ndarray:
    """Random sine series ``sum_i sqrt(2)/pi xi_i sin(i pi s)``, ``xi_i ~ N(0, i^-4)``."""
    i = np.arange(1, n_terms + 1)
    xi = np.random.default_rng(rng_seed).standard_normal(n_terms) * i**-2.0
    return (np.sqrt(2.0) / np.pi) * np.sin(np.pi * np.outer(s, i)) @ xi


def ode_problem(mesh_exponent: int, n_obs: int, rng_seed: int = 0) -> LinearProblem:
    """Recover the source ``x`` of ``-p'' + p = x``, ``p(0) = p(1) = 0``, from ``p(k/K)``.

    ``A = O G^-1`` where ``O`` picks the grid node nearest to each observation
    point; observations at the boundary ``s = 1`` read the Dirichlet value 0.
    Blocks are single rows.
    """
    G, s = ode_operator(mesh_exponent)
    d = s.size
    if not 1 <= n_obs <= d:
        raise ValueError(f"n_obs must lie in [1, {d}]")
    n_cells = d + 1
    obs = np.arange(1, n_obs + 1) / n_obs
    nodes = np.rint(obs * n_cells).astype(int)  # 0 and n_cells are boundary nodes

    # rows of G^-1 (G is symmetric): solve G Z = E for the observed nodes
    delta = 1.0 / n_cells
    ab = np.zeros((3, d))
    ab[0, 1:] = -1.0 / delta**2
    ab[1, :] = 2.0 / delta**2 + 1.0
    ab[2, :-1] = -1.0 / delta**2
    interior = (nodes >= 1) & (nodes <= d)
    E = np.zeros((d, n_obs))
    E[nodes[interior] - 1, np.flatnonzero(interior)] = 1.0
    Z = scipy.linalg.solve_banded((1, 1), ab, E)
    A = Z.T

    truth = ode_ground_truth(s, rng_seed)
    y = A @ truth
    meta = {"grid": s, "G": G, "ground_truth": truth, "obs_points": obs, "mesh": delta}
    return LinearProblem(A, y, [[k] for k in range(n_obs)], meta, name="ode")


# -- Radon transform -----------------------------------------------------------

def ray_intersections(theta: float, t: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixels hit by one ray through the unit image ``[-1/2, 1/2]^2``.

    The ray is ``{t (cos th, sin th) + s (-sin th, cos th)}``.  Pixels are
    ``n x n``, row 0 at the top, flattened row-major.  Returns flat pixel
    indices and intersection lengths, found by walking the sorted crossings
    with the grid lines.
    """
    c, sn = np.cos(theta), np.sin(theta)
    p0 = np.array([t * c, t * sn])
    dvec = np.array([-sn, c])
    lo, hi = -np.inf, np.inf
    for ax in range(2):
        if abs(dvec[ax]) < 1e-15:
            if not -0.5 <= p0[ax] <= 0.5:
                return np.array([], dtype=np.intp), np.array([])
            continue
        a = (-0.5 - p0[ax]) / dvec[ax]
        b = (0.5 - p0[ax]) / dvec[ax]
        lo, hi = max(lo, min(a, b)), min(hi, max(a, b))
    if not hi > lo:
        return np.array([], dtype=np.intp), np.array([])

    lines = -0.5 + np.arange(n + 1) / n
    cuts = [np.array([lo, hi])]
    for ax in range(2):
        if abs(dvec[ax]) >= 1e-15:
            sv = (lines - p0[ax]) / dvec[ax]
            cuts.append(sv[(sv > lo) & (sv < hi)])
    svals = np.unique(np.concatenate(cuts))
    seg = np.diff(svals)
    mid = 0.5 * (svals[:-1] + svals[1:])
    keep = seg > 1e-14
    seg, mid = seg[keep], mid[keep]
    xs = p0[0] + mid * dvec[0]
    ys = p0[1] + mid * dvec[1]
    col = np.clip(np.floor((xs + 0.5) * n).astype(np.intp), 0, n - 1)
    row = np.clip(np.floor((0.5 - ys) * n).astype(np.intp), 0, n - 1)
    return row * n + col, seg


def radon_geometry(n_angles: int, n_rays: int) -> tuple[np.ndarray, np.ndarray]:
    """Angles ``j pi / n_angles`` and detector offsets spanning the bounding circle."""
    if n_angles < 1 or n_rays < 1:
        raise ValueError("need at least one angle and one ray")
    thetas = np.arange(n_angles) * np.pi / n_angles
    r = np.sqrt(2.0) / 2.0
    offsets = -r + (np.arange(n_rays) + 0.5) * (2.0 * r / n_rays)
    return thetas, offsets


def radon_matrix(image_size: int, n_angles: int, n_rays: int) -> sp.csr_matrix:
    """Sparse parallel-beam projector; row ``i * n_rays + j`` is ray ``j`` at angle ``i``."""
    if image_size < 2:
        raise ValueError("image_size must be >= 2")
    thetas, offsets = radon_geometry(n_angles, n_rays)
    indptr, indices, data = [0], [], []
    for th in thetas:
        for t in offsets:
            idx, ln = ray_intersections(th, t, image_size)
            order = np.argsort(idx, kind="stable")
            indices.append(idx[order])
            data.append(ln[order])
            indptr.append(indptr[-1] + idx.size)
    shape = (n_angles * n_rays, image_size**2)
    return sp.csr_matrix(
        (np.concatenate(data), np.concatenate(indices), np.array(indptr)), shape=shape
    )


def radon_problem(image_size: int, n_angles: int, n_rays: int, ground_truth) -> LinearProblem:
    """Tomography problem ``y = A x_true``; one block per projection angle."""
    truth = np.asarray(ground_truth, dtype=float).ravel()
    if truth.size != image_size**2:
        raise ValueError(f"ground truth must have {image_size**2} entries, got {truth.size}")
    A = radon_matrix(image_size, n_angles, n_rays)
    blocks = [np.arange(i * n_rays, (i + 1) * n_rays) for i in range(n_angles)]
    meta = {"ground_truth": truth, "image_shape": (image_size, image_size)}
    return LinearProblem(A, A @ truth, blocks, meta, name="radon")


def phantom(n: int) -> np.ndarray:
    """Small ellipse phantom on the unit square, ``n x n``, row 0 at the top."""
    c = (np.arange(n) + 0.5) / n - 0.5
    X, Y = np.meshgrid(c, -c)
    img = np.zeros((n, n))
    # (value, center x, center y, semi-axis a, semi-axis b, angle)
    for v, x0, y0, a, b, phi in [
        (1.0, 0.0, 0.0, 0.40, 0.45, 0.0),
        (-0.6, 0.0, 0.0, 0.33, 0.38, 0.0),
        (0.4, 0.12, 0.08, 0.08, 0.16, 0.4),
        (0.3, -0.12, 0.05, 0.10, 0.07, -0.3),
        (0.5, 0.0, -0.22, 0.06, 0.05, 0.0),
    ]:
        xr = (X - x0) * np.cos(phi) + (Y - y0) * np.sin(phi)
        yr = -(X - x0) * np.sin(phi) + (Y - y0) * np.cos(phi)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += v
    return img


def random_linear_problem(K: int, d: int, rank: int | None = None, n_blocks: int | None = None,
                          seed: int = 0) -> LinearProblem:
    """Gaussian test problem with consistent data; ``rank`` below ``min(K, d)`` makes it deficient."""
    rng = np.random.default_rng(seed)
    r = min(K, d) if rank is None else rank
    A = rng.standard_normal((K, r)) @ rng.standard_normal((r, d)) / np.sqrt(d)
    y = A @ rng.standard_normal(d)
    nb = K if n_blocks is None else n_blocks
    blocks = np.array_split(np.arange(K), nb)
    return LinearProblem(A, y, blocks, name=f"random{K}x{d}")


def diagonal_problem(singular_values, x_star, n_blocks: int | None = None) -> LinearProblem:
    """``A = diag(singular_values)`` with consistent data ``y = A x_star``."""
    s = np.asarray(singular_values, dtype=float)
    x = np.asarray(x_star, dtype=float)
    if s.shape != x.shape or s.ndim != 1:
        raise ValueError("singular_values and x_star must be vectors of equal length")
    nb = s.size if n_blocks is None else n_blocks
    meta = {"ground_truth": x}
    return LinearProblem(np.diag(s), s * x, np.array_split(np.arange(s.size), nb), meta, name="diagonal")
