"""Ground truth for linear problems: SVD, minimum-norm and Tikhonov solutions.

With ``A = sum_n sigma_n u_n v_n^T``::

    x*       = sum_n  1/sigma_n              <y, u_n> v_n
    x_lambda = sum_n  sigma_n/(sigma_n^2+lam) <y, u_n> v_n

The oracles are dense and meant for diagnostics, not for speed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .problems import LinearProblem, Objective
from .schedules import PolynomialSchedule, schedule_arrays

__all__ = [
    "SpectralDecomposition",
    "ViscosityCurvePoint",
    "ViscosityCurve",
    "GapSeries",
    "OracleError",
    "decompose",
    "min_norm_solution",
    "tikhonov_solution",
    "energy",
    "filter_residual",
    "viscosity_curve",
    "source_condition_rate",
    "viscosity_gap_series",
    "SpectralOracle",
    "ClosedFormOracle",
    "DualOracle",
    "make_oracle",
    "MAX_SVD_DIM",
]

RANK_TOL = 1e-10
MAX_SVD_DIM = 2048
ENERGY_TOL = 1e-12


class OracleError(RuntimeError):
    """An oracle quantity is internally inconsistent."""


@dataclass(frozen=True)
class SpectralDecomposition:
    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    rank_tolerance: float = RANK_TOL

    @property
    def rank(self) -> int:
        s = self.singular_values
        if s.size == 0 or s[0] == 0:
            return 0
        return int(np.count_nonzero(s > self.rank_tolerance * s[0]))

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def decompose(A, rank_tolerance: float = RANK_TOL) -> SpectralDecomposition:
    """Thin SVD of a (dense or sparse) operator."""
    M = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    if isinstance(A, LinearProblem):
        M = A._dense
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    return SpectralDecomposition(s, U, Vt.T, rank_tolerance)


def _coeffs(decomp: SpectralDecomposition, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != decomp.left_vectors.shape[0]:
        raise ValueError("y has incompatible length")
    return y @ decomp.left_vectors


def min_norm_solution(decomp: SpectralDecomposition, y) -> np.ndarray:
    """``A^+ y``, truncating singular values below ``rank_tolerance * sigma_1``.

    For the zero operator this is the zero vector (``decomp.rank == 0``).
    """
    r = decomp.rank
    c = _coeffs(decomp, y)[:r] / decomp.singular_values[:r]
    return decomp.right_vectors[:, :r] @ c


def tikhonov_solution(decomp: SpectralDecomposition, y, lam: float) -> np.ndarray:
    """Minimizer of ``1/2 |Ax - y|^2 + lam/2 |x|^2``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    s = decomp.singular_values
    return decomp.right_vectors @ (s / (s * s + lam) * _coeffs(decomp, y))


def filter_residual(sigma: float, lam: float) -> float:
    """``1/sigma - sigma/(sigma^2 + lam) = lam / (sigma (sigma^2 + lam))``."""
    if not (sigma > 0 and lam > 0):
        raise ValueError("sigma and lambda must be positive")
    return lam / (sigma * (sigma * sigma + lam))


def _f_lambda(problem: Objective, x, lam):
    x = np.asarray(x, dtype=float)
    return problem.value(x) + 0.5 * lam * np.sum(x * x, axis=-1)


def energy(problem: Objective, decomp: SpectralDecomposition | None, x, lam: float):
    """``f_lam(x) - f_lam(x_lam)``, the regularized optimality gap.

    ``decomp`` may be ``None`` for objectives carrying a closed-form solution
    curve.  Values within ``-1e-12`` (relative to the terms) of zero are
    clamped to 0; anything more negative means ``x_lam`` is wrong.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if decomp is None:
        xl = problem.metadata["x_lambda"](lam)
    else:
        y = problem.data_y if hasattr(problem, "data_y") else problem.metadata["linear_form"][1]
        xl = tikhonov_solution(decomp, y, lam)
    ref = _f_lambda(problem, xl, lam)
    e = _f_lambda(problem, x, lam) - ref
    tol = ENERGY_TOL * np.maximum(1.0, np.abs(ref))
    if np.any(e < -tol):
        raise OracleError(f"negative energy {np.min(e):.3e}; x_lambda is not the minimizer")
    return np.maximum(e, 0.0) if np.ndim(e) else max(float(e), 0.0)


# -- viscosity curve -------------------------------------------------------------

@dataclass(frozen=True)
class ViscosityCurvePoint:
    lam: float
    x_lambda: np.ndarray
    dist_to_xstar: float
    norm_gap: float


@dataclass
class ViscosityCurve:
    points: list[ViscosityCurvePoint]
    xi_hat: float | None = None
    xi_intercept: float | None = None

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]


def viscosity_curve(decomp: SpectralDecomposition, y, lambdas) -> ViscosityCurve:
    """``x_lam``, ``|x_lam - x*|`` and ``|x*|^2 - |x_lam|^2`` along a decreasing grid.

    With three or more points the Hölder exponent ``xi`` in
    ``|x_lam - x*| ~ C lam^xi`` is fitted by least squares in log-log.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.size == 0 or np.any(lambdas <= 0):
        raise ValueError("lambdas must be positive")
    if np.any(np.diff(lambdas) > 0):
        raise ValueError("lambdas must be descending")
    xs = min_norm_solution(decomp, y)
    ns = xs @ xs
    pts = []
    for lam in lambdas:
        xl = tikhonov_solution(decomp, y, lam)
        pts.append(ViscosityCurvePoint(float(lam), xl, float(np.linalg.norm(xl - xs)), float(max(ns - xl @ xl, 0.0))))
    curve = ViscosityCurve(pts)
    if len(pts) >= 3:
        d = np.array([p.dist_to_xstar for p in pts])
        ok = d > 0
        if ok.sum() >= 3:
            slope, icpt = np.polyfit(np.log(lambdas[ok]), np.log(d[ok]), 1)
            curve.xi_hat, curve.xi_intercept = float(slope), float(icpt)
    return curve


def source_condition_rate(nu: float) -> float:
    """Exponent of ``lam`` in the bound on ``|x* - x_lam|^2`` under a source condition.

    Follows the bound ``C lam`` for ``nu >= 2`` and ``C lam^(2 nu)`` for
    ``nu < 2``.
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    return 1.0 if nu >= 2 else 2.0 * nu


@dataclass
class GapSeries:
    ks: np.ndarray
    terms: np.ndarray
    partial_sums: np.ndarray
    term_exponent: float | None
    appears_summable: bool
    symbolic_exponent: float | None = None
    notes: list[str] = field(default_factory=list)

    def __str__(self):
        e = "n/a" if self.term_exponent is None else f"{self.term_exponent:.4f}"
        verdict = "appears summable" if self.appears_summable else "NOT provably summable"
        return f"terms ~ k^-{e}: {verdict} (partial sum {self.partial_sums[-1]:.6g})"


def viscosity_gap_series(decomp: SpectralDecomposition, y, schedule: PolynomialSchedule,
                         horizon: int, tail_fraction: float = 0.5) -> GapSeries:
    """Partial sums of ``sum_k alpha_k lam_k (|x*|^2 - |x_lam_k|^2)`` up to ``horizon``.

    The decay exponent of the terms is fitted over the tail; the series is
    reported as summable when that exponent exceeds ``1.05``.  This is
    numerical evidence, not a proof.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    ks = np.arange(1, horizon + 1)
    alpha, lam = schedule_arrays(schedule, ks)
    s = decomp.singular_values
    c2 = _coeffs(decomp, y) ** 2
    r = decomp.rank
    ns = np.sum(c2[:r] / s[:r] ** 2)
    gaps = np.zeros(horizon)
    pos = lam > 0
    if np.any(pos):
        # |x_lam|^2 = sum c_n^2 s_n^2 / (s_n^2 + lam)^2, vectorized over the grid
        norms = np.array([np.sum(c2 * s**2 / (s**2 + l) ** 2) for l in lam[pos]])
        gaps[pos] = np.maximum(ns - norms, 0.0)
    terms = alpha * lam * gaps
    psums = np.cumsum(terms)

    notes = []
    expo = None
    m = max(int(horizon * (1 - tail_fraction)), 0)
    tk, tt = ks[m:], terms[m:]
    ok = tt > 0
    if ok.sum() >= 5:
        slope = np.polyfit(np.log(tk[ok]), np.log(tt[ok]), 1)[0]
        expo = float(-slope)
    elif not np.any(terms > 0):
        notes.append("all terms vanish")
    summable = (expo is not None and expo > 1.05) or not np.any(terms > 0)
    # near lam -> 0 the norm gap is ~ lam for full-rank finite problems
    symbolic = float(schedule.q + 2 * schedule.p) if schedule.c_lambda > 0 else None
    return GapSeries(ks, terms, psums, expo, summable, symbolic, notes)


# -- oracle handles for the optimizer ---------------------------------------------

class SpectralOracle:
    """SVD-backed ``x*``, ``f*`` and ``x_lam`` for a linear problem."""

    def __init__(self, problem: LinearProblem, decomp: SpectralDecomposition | None = None):
        self.problem = problem
        self.decomp = decomp if decomp is not None else decompose(problem._dense)
        self.x_star = min_norm_solution(self.decomp, problem.data_y)
        self.f_star = float(problem.value(self.x_star))
        self._c = _coeffs(self.decomp, problem.data_y)

    def x_lambda(self, lam: float) -> np.ndarray:
        s = self.decomp.singular_values
        return self.decomp.right_vectors @ (s / (s * s + lam) * self._c)

    def f_lambda_min(self, lam: float) -> float:
        return float(_f_lambda(self.problem, self.x_lambda(lam), lam))


class ClosedFormOracle:
    """Oracle from an objective's ``x_star`` / ``x_lambda`` metadata."""

    def __init__(self, problem: Objective):
        meta = problem.metadata
        self.problem = problem
        self.x_star = np.asarray(meta["x_star"], dtype=float)
        self.f_star = float(meta.get("f_star", problem.value(self.x_star)))
        self._xl = meta["x_lambda"]

    def x_lambda(self, lam: float) -> np.ndarray:
        return np.asarray(self._xl(lam), dtype=float)

    def f_lambda_min(self, lam: float) -> float:
        return float(_f_lambda(self.problem, self.x_lambda(lam), lam))


class DualOracle:
    """Large-``d`` fallback: ``x_lam = A^T (A A^T + lam I)^-1 y``; no ``x*``."""

    def __init__(self, problem: LinearProblem, f_star: float = 0.0):
        self.problem = problem
        A = problem._dense
        self._gram = A @ A.T
        self.x_star = None
        self.f_star = f_star

    def x_lambda(self, lam: float) -> np.ndarray:
        K = self._gram.shape[0]
        z = scipy.linalg.solve(self._gram + lam * np.eye(K), self.problem.data_y, assume_a="pos")
        return self.problem._dense.T @ z

    def f_lambda_min(self, lam: float) -> float:
        return float(_f_lambda(self.problem, self.x_lambda(lam), lam))


def make_oracle(problem: Objective, max_svd_dim: int = MAX_SVD_DIM):
    """Pick the oracle the problem size allows; ``None`` if there is none."""
    if "x_lambda" in problem.metadata and "x_star" in problem.metadata:
        return ClosedFormOracle(problem)
    if isinstance(problem, LinearProblem):
        if problem.dimension <= max_svd_dim:
            return SpectralOracle(problem)
        return DualOracle(problem)
    return None
