"""Empirical decay exponents and (p, q) rate maps."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .schedules import DEFAULT_BETA_OFFSET, Mode, PolynomialSchedule, Theorem, predicted_rates

__all__ = [
    "RateEstimate",
    "SweepResult",
    "InsufficientDataError",
    "estimate_rate",
    "theoretical_exponent",
    "theoretical_heatmap",
    "empirical_sweep",
    "heatmap_csv",
]

DEFAULT_TAIL_FRACTION = 0.5
MIN_POINTS = 5
RATE_TOLERANCE = 0.1


class InsufficientDataError(ValueError):
    """Too few positive values to fit a slope."""


@dataclass(frozen=True)
class RateEstimate:
    """Fit of ``error ~ c * k^-exponent``; ``intercept`` is ``log c``."""

    exponent: float
    intercept: float
    r_squared: float
    tail_fraction: float
    n_points: int
    n_excluded: int = 0

    def __str__(self):
        return (f"exponent {self.exponent:.4f} (r^2 {self.r_squared:.3f}, "
                f"{self.n_points} points, tail {self.tail_fraction:g})")


def estimate_rate(ks, errors, tail_fraction: float = DEFAULT_TAIL_FRACTION) -> RateEstimate:
    """Least-squares slope of ``log error`` against ``log k`` over the tail.

    Parameters
    ----------
    ks : array_like
        Ascending iteration indices.
    errors : array_like
        Error values; entries that are not strictly positive (or not finite)
        are dropped and counted in ``n_excluded``.
    tail_fraction : float
        Fraction of the recorded points, counted from the end, to fit.

    Raises
    ------
    InsufficientDataError
        Fewer than five usable points in the tail window.
    """
    ks = np.asarray(ks, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if ks.shape != errors.shape:
        raise ValueError("ks and errors differ in length")
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    if np.any(np.diff(ks) <= 0):
        raise ValueError("ks must be strictly ascending")
    start = len(ks) - int(np.ceil(tail_fraction * len(ks)))
    k, e = ks[start:], errors[start:]
    good = (e > 0) & np.isfinite(e) & (k > 0)
    n_bad = int(np.count_nonzero(~good))
    if good.sum() < MIN_POINTS:
        raise InsufficientDataError(f"need {MIN_POINTS} positive errors in the tail, have {int(good.sum())}")
    lx, ly = np.log(k[good]), np.log(e[good])
    xm, ym = lx.mean(), ly.mean()
    sxx = np.sum((lx - xm) ** 2)
    slope = np.sum((lx - xm) * (ly - ym)) / sxx
    icpt = ym - slope * xm
    ss_tot = np.sum((ly - ym) ** 2)
    ss_res = np.sum((ly - icpt - slope * lx) ** 2)
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, ly.size) else float(max(0.0, 1.0 - ss_res / ss_tot))
    return RateEstimate(float(-slope), float(icpt), r2, float(tail_fraction), int(good.sum()), n_bad)


# -- heatmaps ------------------------------------------------------------------

@dataclass
class SweepResult:
    """Per-cell exponents on a ``(p, q)`` grid, indexed ``[i_p, j_q]``."""

    p_grid: np.ndarray
    q_grid: np.ndarray
    mode: Mode
    xi: float
    theoretical: np.ndarray | None = None
    empirical: np.ndarray | None = None
    valid: np.ndarray | None = None
    notes: dict = field(default_factory=dict)

    @property
    def cell_values(self) -> np.ndarray:
        return self.theoretical if self.theoretical is not None else self.empirical

    @property
    def argmax(self) -> tuple[float, float, float]:
        """``(p, q, value)`` of the largest theoretical cell (first in row-major order)."""
        vals = self.cell_values
        i, j = np.unravel_index(np.nanargmax(vals), vals.shape)
        return float(self.p_grid[i]), float(self.q_grid[j]), float(vals[i, j])


_THEOREM_FOR_MODE = {Mode.L2: Theorem.L2_RATE, Mode.AS: Theorem.AS_RATE, Mode.DET: Theorem.DET_RATE}


def theoretical_exponent(mode, xi, p, q, beta_rule=None) -> float:
    """Predicted decay exponent of ``|X_k - x*|^2`` at one ``(p, q)``; 0 where no theorem applies.

    ``beta_rule`` maps ``q`` to the almost-sure ``beta`` and defaults to
    ``2q - 1 - 1e-3``.
    """
    mode = Mode(mode)
    if not (0 <= q < 1 and 0 <= p <= 1):
        return 0.0
    beta = None
    if mode is Mode.AS:
        beta = (beta_rule or (lambda qq: 2 * qq - 1 - DEFAULT_BETA_OFFSET))(q)
    # prefactors only enter the side conditions on the boundaries; these
    # choices (C_alpha = C_lambda = L = 1) satisfy all of them except q = 0, p = 1
    s = PolynomialSchedule(1.0, q, 1.0, p)
    rep = predicted_rates(s, _THEOREM_FOR_MODE[mode], xi=xi, beta=beta, smoothness_L=1.0)
    if not rep.applies:
        return 0.0
    v = rep.predicted_exponents.get("dist_to_xstar")
    return float(v) if v is not None else 0.0


def theoretical_heatmap(mode, xi, p_grid, q_grid, beta_rule=None) -> SweepResult:
    """Evaluate :func:`theoretical_exponent` on every grid cell."""
    p_grid = np.asarray(p_grid, dtype=float)
    q_grid = np.asarray(q_grid, dtype=float)
    vals = np.array([[theoretical_exponent(mode, xi, p, q, beta_rule) for q in q_grid] for p in p_grid])
    return SweepResult(p_grid, q_grid, Mode(mode), float(xi), theoretical=vals, valid=vals > 0)


def empirical_sweep(problem, base_config, p_grid, q_grid, n_replicas, master_seed,
                    tail_fraction: float = DEFAULT_TAIL_FRACTION, xi: float | None = None,
                    mode=Mode.AS, oracle="auto", quantity: str = "dist_sq_to_xstar") -> SweepResult:
    """Fit the decay exponent of the mean ``quantity`` for each ``(p, q)`` cell.

    Each cell reuses ``base_config`` with the exponents replaced and the same
    ``master_seed``.  Cells where any replica diverged, or where the fit has
    too few points, are marked invalid and hold NaN.
    """
    from .optimizer import monte_carlo

    p_grid = np.asarray(p_grid, dtype=float)
    q_grid = np.asarray(q_grid, dtype=float)
    emp = np.full((p_grid.size, q_grid.size), np.nan)
    valid = np.zeros(emp.shape, dtype=bool)
    notes = {}
    for i, p in enumerate(p_grid):
        for j, q in enumerate(q_grid):
            cfg = replace(base_config, schedule=base_config.schedule.with_exponents(p=p, q=q))
            mean, _ = monte_carlo(problem, cfg, n_replicas, master_seed, oracle=oracle)
            if mean.diverged_replicas:
                notes[(i, j)] = f"{len(mean.diverged_replicas)} replicas diverged"
                continue
            try:
                est = estimate_rate(mean.iterations[1:], getattr(mean, quantity)[1:], tail_fraction)
            except InsufficientDataError as exc:
                notes[(i, j)] = str(exc)
                continue
            emp[i, j] = est.exponent
            valid[i, j] = True
    theo = None
    if xi is not None:
        theo = theoretical_heatmap(mode, xi, p_grid, q_grid).theoretical
    return SweepResult(p_grid, q_grid, Mode(mode), float(xi) if xi else float("nan"),
                       theoretical=theo, empirical=emp, valid=valid, notes=notes)


def _num(x) -> str:
    return "" if x is None or not np.isfinite(x) else repr(float(x))


def heatmap_csv(result: SweepResult) -> str:
    """CSV text with columns ``p,q,theoretical_exponent,empirical_exponent,valid``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "q", "theoretical_exponent", "empirical_exponent", "valid"])
    for i, p in enumerate(result.p_grid):
        for j, q in enumerate(result.q_grid):
            t = None if result.theoretical is None else result.theoretical[i, j]
            e = None if result.empirical is None else result.empirical[i, j]
            v = bool(result.valid[i, j]) if result.valid is not None else True
            w.writerow([repr(float(p)), repr(float(q)), _num(t), _num(e), int(v)])
    return buf.getvalue()
