"""Polynomial step-size / regularization schedules and their theory checks.

A schedule is the pair ``alpha_k = c_alpha * k**-q`` and
``lambda_k = c_lambda * k**-p``.  :func:`validate_theorem` checks a schedule
against the hypotheses of the convergence theorems for regularized SGD and
:func:`predicted_rates` fills in the decay exponents those theorems promise.

Exponents ``p`` and ``q`` may be given as :class:`fractions.Fraction`; boundary
memberships (``q == 1 - p`` and friends) are then decided exactly.  Floats are
compared with an absolute tolerance of ``1e-12``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from numbers import Rational, Real

import numpy as np

__all__ = [
    "PolynomialSchedule",
    "Theorem",
    "Mode",
    "TheoremReport",
    "schedule_at",
    "schedule_arrays",
    "validate_theorem",
    "predicted_rates",
    "optimal_schedule",
    "DEFAULT_BETA_OFFSET",
]

BOUNDARY_TOL = 1e-12
DEFAULT_BETA_OFFSET = 1e-3
QUANTITIES = ("f_gap", "energy", "dist_to_xlambda", "dist_to_xstar")


class Theorem(str, enum.Enum):
    L2_RATE = "L2_RATE"
    AS_RATE = "AS_RATE"
    L2_GENERAL = "L2_GENERAL"
    DET_RATE = "DET_RATE"


class Mode(str, enum.Enum):
    L2 = "L2"
    AS = "AS"
    DET = "DET"


@dataclass(frozen=True)
class PolynomialSchedule:
    """``alpha_k = c_alpha k^-q`` and ``lambda_k = c_lambda k^-p``.

    ``k_start`` is the index used for the first update; the optimizer uses
    ``k_start, k_start + 1, ...``.
    """

    c_alpha: Real
    q: Real
    c_lambda: Real
    p: Real
    k_start: int = 1

    def __post_init__(self):
        for name in ("c_alpha", "q", "c_lambda", "p"):
            v = getattr(self, name)
            if not np.isfinite(float(v)):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if not self.c_alpha > 0:
            raise ValueError("c_alpha must be positive")
        if self.c_lambda < 0:
            raise ValueError("c_lambda must be non-negative")
        if not 0 <= self.q < 1:
            raise ValueError("q must lie in [0, 1)")
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")
        if int(self.k_start) != self.k_start or self.k_start < 1:
            raise ValueError("k_start must be a positive integer")

    def with_exponents(self, p=None, q=None) -> "PolynomialSchedule":
        return replace(self, p=self.p if p is None else p, q=self.q if q is None else q)


def schedule_at(s: PolynomialSchedule, k: int) -> tuple[float, float]:
    """Return ``(alpha_k, lambda_k)``."""
    if k < 1:
        raise ValueError(f"iteration index must be >= 1, got {k}")
    return float(s.c_alpha) * k ** -float(s.q), float(s.c_lambda) * k ** -float(s.p)


def schedule_arrays(s: PolynomialSchedule, ks) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`schedule_at` over an array of indices."""
    ks = np.asarray(ks, dtype=float)
    if ks.size and ks.min() < 1:
        raise ValueError("iteration indices must be >= 1")
    return float(s.c_alpha) * ks ** -float(s.q), float(s.c_lambda) * ks ** -float(s.p)


# -- exact-or-tolerant comparisons -------------------------------------------

def _exact(*xs) -> bool:
    return all(isinstance(x, Rational) for x in xs)


def _close(a, b) -> bool:
    if _exact(a, b):
        return a == b
    return abs(float(a) - float(b)) <= BOUNDARY_TOL


def _lt(a, b) -> bool:
    if _exact(a, b):
        return a < b
    return float(a) < float(b) and not _close(a, b)


def _le(a, b) -> bool:
    return _lt(a, b) or _close(a, b)


def _in_open(x, lo, hi) -> bool:
    return _lt(lo, x) and _lt(x, hi)


def _in_half_open(x, lo, hi) -> bool:
    """``x`` in ``(lo, hi]``."""
    return _lt(lo, x) and _le(x, hi)


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return f"{float(x):.6g}"


# -- reports ---------------------------------------------------------------

@dataclass
class TheoremReport:
    theorem_id: Theorem
    applies: bool
    violated_conditions: list[str] = field(default_factory=list)
    predicted_exponents: dict[str, float | None] = field(
        default_factory=lambda: dict.fromkeys(QUANTITIES)
    )
    notes: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        head = f"{self.theorem_id.value}: {'applies' if self.applies else 'does not apply'}"
        lines = [head]
        lines += [f"  violated: {c}" for c in self.violated_conditions]
        for name, e in self.predicted_exponents.items():
            if e is not None:
                lines.append(f"  {name}: O(k^-{_fmt(e)})")
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


def _theorem(theorem) -> Theorem:
    try:
        return Theorem(theorem.value if isinstance(theorem, enum.Enum) else str(theorem).upper())
    except ValueError:
        raise ValueError(f"unknown theorem id {theorem!r}") from None


def default_beta(q):
    """Near-supremum choice ``beta = 2q - 1 - 1e-3``."""
    return 2 * q - 1 - (Fraction(1, 1000) if isinstance(q, Fraction) else DEFAULT_BETA_OFFSET)


def validate_theorem(s: PolynomialSchedule, theorem, beta=None, smoothness_L=None) -> TheoremReport:
    """Check ``s`` against the hypotheses of ``theorem``.

    ``beta`` is only used by ``AS_RATE``; ``smoothness_L`` only by ``DET_RATE``.
    """
    th = _theorem(theorem)
    p, q, ca, cl = s.p, s.q, s.c_alpha, s.c_lambda
    bad: list[str] = []
    notes: list[str] = []

    if beta is not None and th is not Theorem.AS_RATE:
        notes.append(f"beta is not used by {th.value}; ignored")
    if smoothness_L is not None and th is not Theorem.DET_RATE:
        smoothness_L = None

    if th is Theorem.L2_RATE:
        if not cl > 0:
            bad.append("C_lambda > 0")
        if not _in_half_open(p, 0, Fraction(1, 2)):
            bad.append(f"p in (0, 1/2] (p = {_fmt(p)})")
        if not _lt(p, q):
            bad.append(f"q > p (q = {_fmt(q)}, p = {_fmt(p)})")
        if not _le(q, 1 - p):
            bad.append(f"q <= 1 - p (q = {_fmt(q)}, 1 - p = {_fmt(1 - p)})")
        elif _close(q, 1 - p) and not 2 * cl * ca > 1 - q:
            bad.append("2 C_lambda C_alpha > 1 - q on the boundary q = 1 - p")
    elif th is Theorem.AS_RATE:
        if beta is None:
            beta = default_beta(q)
            notes.append(f"beta defaulted to 2q - 1 - 1e-3 = {_fmt(beta)}")
        if not cl > 0:
            bad.append("C_lambda > 0")
        if not _in_open(p, 0, Fraction(1, 3)):
            bad.append(f"p in (0, 1/3) (p = {_fmt(p)})")
        if not _in_open(q, (p + 1) / 2, 1 - p):
            bad.append(f"q in ((p+1)/2, 1-p) = ({_fmt((p + 1) / 2)}, {_fmt(1 - p)}) (q = {_fmt(q)})")
        if not _in_open(beta, 0, 2 * q - 1):
            bad.append(f"beta in (0, 2q-1) (beta = {_fmt(beta)})")
    elif th is Theorem.L2_GENERAL:
        # little-o conditions decided symbolically for polynomial schedules
        if not (cl > 0 and _lt(0, p)):
            bad.append("p > 0 and C_lambda > 0 needed for lambda_k -> 0")
        if not _lt(p, q):
            bad.append("alpha_k = o(lambda_k) needs q > p")
        if not _le(p + q, 1):
            bad.append("sum alpha_k lambda_k = inf needs p + q <= 1")
        if not _lt(q, 1):
            bad.append("lambda_k - lambda_(k-1) = o(alpha_k lambda_k) needs q < 1")
        notes.append(
            "alternative route (sum alpha_k^2 < inf plus sum alpha_k lambda_k "
            "(|x*|^2 - |x_lambda_k|^2) < inf) is problem-dependent, "
            "see oracles.viscosity_gap_series"
        )
    else:  # DET_RATE
        if not cl > 0:
            bad.append("C_lambda > 0")
        if not _in_half_open(p, 0, 1):
            bad.append(f"p in (0, 1] (p = {_fmt(p)})")
        if not _le(q, 1 - p):
            bad.append(f"q in [0, 1-p] (q = {_fmt(q)})")
        if _close(q, 0):
            if smoothness_L is None:
                notes.append("L not supplied; C_alpha < 2/L unchecked")
            elif not ca < 2 / smoothness_L:
                bad.append(f"C_alpha < 2/L for q = 0 (C_alpha = {_fmt(ca)}, 2/L = {_fmt(2 / smoothness_L)})")
            if _close(p, 1):
                if smoothness_L is None:
                    notes.append("L not supplied; 2 C_lambda C_alpha (1 - L C_alpha/2) > 1 unchecked")
                elif not 2 * cl * ca * (1 - smoothness_L * ca / 2) > 1:
                    bad.append("2 C_lambda C_alpha (1 - L C_alpha / 2) > 1 for q = 0, p = 1")
        elif _close(q, 1 - p) and not 2 * cl * ca > 1 - q:
            bad.append("2 C_lambda C_alpha > 1 - q on the boundary q = 1 - p")

    return TheoremReport(th, not bad, bad, dict.fromkeys(QUANTITIES), notes)


def _pos(x):
    """Keep a strictly positive exponent, map anything else to ``None``."""
    return x if _lt(0, x) else None


def predicted_rates(s: PolynomialSchedule, theorem, xi=None, beta=None, smoothness_L=None) -> TheoremReport:
    """Validate ``s`` and fill in the decay exponents promised by ``theorem``.

    All distance exponents refer to *squared* distances.  ``dist_to_xstar``
    needs the Hölder exponent ``xi`` of the viscosity curve.
    """
    th = _theorem(theorem)
    if xi is not None and not xi > 0:
        raise ValueError("xi must be positive")
    if th is Theorem.AS_RATE and beta is None:
        beta = default_beta(s.q)
    report = validate_theorem(s, th, beta=beta, smoothness_L=smoothness_L)
    if not report.applies:
        return report
    p, q = s.p, s.q
    ex = report.predicted_exponents

    if th is Theorem.L2_RATE:
        ex["f_gap"] = _pos(min(p, q - p))
        if _in_open(p, 0, Fraction(1, 3)) and _in_open(q, 2 * p, 1 - p):
            ex["dist_to_xlambda"] = _pos(min(1 - q - p, q - 2 * p))
            if xi is not None:
                ex["dist_to_xstar"] = _pos(min(1 - q - p, q - 2 * p, 2 * xi * p))
    elif th is Theorem.AS_RATE:
        ex["f_gap"] = _pos(min(beta, p))
        # norm exponent min(beta - p, 1 - q - p), doubled for the squared norm
        ex["dist_to_xlambda"] = _pos(2 * min(beta - p, 1 - q - p))
        if xi is not None:
            ex["dist_to_xstar"] = _pos(min(1 - q - p, beta - p, 2 * xi * p))
    elif th is Theorem.DET_RATE:
        ex["energy"] = _pos(1 - q)
        ex["f_gap"] = _pos(p)
        if _lt(q, 1 - p):
            ex["dist_to_xlambda"] = _pos(1 - q - p)
            if xi is not None:
                ex["dist_to_xstar"] = _pos(min(1 - q - p, 2 * xi * p))
    else:
        report.notes.append("no rate statement; convergence only")
    return report


def optimal_schedule(xi, mode) -> tuple:
    """Exponents ``(p, q)`` maximizing the squared-distance rate, and that rate.

    Pass ``xi`` as a :class:`~fractions.Fraction` for exact output.
    """
    if not xi > 0:
        raise ValueError("xi must be positive")
    mode = Mode(mode.value if isinstance(mode, enum.Enum) else str(mode).upper())
    if isinstance(xi, Rational):
        xi = Fraction(xi)
    if mode is Mode.L2:
        p = 1 / (4 * xi + 3)
        return p, (1 + p) / 2, 2 * xi / (4 * xi + 3)
    if mode is Mode.AS:
        two_thirds = Fraction(2, 3) if isinstance(xi, Fraction) else 2 / 3
        return 1 / (6 * xi + 3), two_thirds, 2 * xi / (6 * xi + 3)
    return 1 / (2 * xi + 1), 0 * xi, 2 * xi / (2 * xi + 1)
