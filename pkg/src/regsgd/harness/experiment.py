"""Turn a configuration into problems, optimizer settings and output files."""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..analysis import InsufficientDataError, RateEstimate, estimate_rate
from ..io import read_matrix
from ..noise import NoiseModel
from ..optimizer import OptimizerConfig, Trajectory, Variant
from ..problems import LinearProblem, Objective, ode_problem, phantom, radon_problem, toy_problem
from ..schedules import PolynomialSchedule, Theorem, TheoremReport, predicted_rates
from .config import ConfigError, ExperimentConfig, dump_config

__all__ = [
    "build_problem",
    "build_optimizer_config",
    "trajectory_csv",
    "config_digest",
    "build_version",
    "theorem_reports",
    "guide_exponents",
    "fit_rates",
    "CSV_HEADER",
]

CSV_HEADER = ["k", "alpha", "lambda", "f_gap", "dist_sq_xstar", "dist_sq_xlambda", "energy", "max_norm"]
_CSV_FIELDS = ["alpha", "lam", "f_gap", "dist_sq_to_xstar", "dist_sq_to_xlambda", "energy", "max_norm"]


def build_version() -> str:
    return f"regsgd {__version__}; numpy {np.__version__}"


def config_digest(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical config text, so equivalent configs share a digest."""
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()


def build_problem(cfg: ExperimentConfig) -> Objective:
    kind = cfg["problem.kind"]
    try:
        if kind == "toy":
            return toy_problem()
        if kind == "ode":
            return ode_problem(cfg["problem.mesh_exponent"], cfg["problem.n_obs"], cfg["problem.rng_seed"])
        if kind == "radon":
            n = cfg["problem.image_size"]
            path = cfg.path("problem.image_path")
            truth = phantom(n) if path is None else read_matrix(path)
            return radon_problem(n, cfg["problem.n_angles"], cfg["problem.n_rays"], truth)
        A = read_matrix(cfg.path("problem.matrix_path"))
        y = read_matrix(cfg.path("problem.y_path")).ravel()
        nb = cfg.get("problem.n_blocks", A.shape[0])
        if not 1 <= nb <= A.shape[0]:
            raise ConfigError("problem.n_blocks must lie in [1, rows of A]")
        return LinearProblem(A, y, np.array_split(np.arange(A.shape[0]), nb), name="linear")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot build {kind} problem: {exc}") from exc


def build_schedule(cfg: ExperimentConfig) -> PolynomialSchedule:
    try:
        return PolynomialSchedule(cfg["schedule.c_alpha"], cfg["schedule.q"],
                                  cfg["schedule.c_lambda"], cfg["schedule.p"])
    except ValueError as exc:
        raise ConfigError(f"schedule: {exc}") from exc


def build_optimizer_config(cfg: ExperimentConfig) -> OptimizerConfig:
    x0 = cfg["optimizer.x0"]
    if x0 not in ("zero", "gaussian"):
        x0 = read_matrix(cfg.path("optimizer.x0")).ravel()
    stride = cfg["optimizer.record_stride"]
    try:
        return OptimizerConfig(
            schedule=build_schedule(cfg),
            noise=NoiseModel(cfg["noise.kind"], float(cfg["noise.sigma"]), float(cfg["noise.a_coeff"])),
            n_iterations=cfg["optimizer.n_iterations"],
            x0=x0,
            record_stride=None if stride == "geometric" else int(stride),
            variant=Variant(cfg["optimizer.variant"]),
            batch_size=cfg["optimizer.batch_size"],
        )
    except ValueError as exc:
        raise ConfigError(f"optimizer: {exc}") from exc


def _cell(v) -> str:
    v = float(v)
    return repr(v) if np.isfinite(v) else ""


def trajectory_csv(traj: Trajectory) -> str:
    """Fixed-schema CSV; unavailable values are empty fields."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    cols = [getattr(traj, f) for f in _CSV_FIELDS]
    for i, k in enumerate(traj.iterations):
        w.writerow([str(int(k))] + [_cell(c[i]) for c in cols])
    return buf.getvalue()


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    """Columns of a trajectory CSV as float arrays (empty fields become NaN)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError(f"{path}: not a trajectory CSV")
    data = np.array([[float(x) if x else np.nan for x in r] for r in rows[1:]]).reshape(-1, len(CSV_HEADER))
    return {name: data[:, i] for i, name in enumerate(CSV_HEADER)}


def theorem_reports(cfg: ExperimentConfig, smoothness_L: float | None = None) -> list[TheoremReport]:
    s = build_schedule(cfg)
    xi, beta = cfg.get("theory.xi"), cfg.get("theory.beta")
    return [predicted_rates(s, th, xi=xi, beta=beta if th is Theorem.AS_RATE else None,
                            smoothness_L=smoothness_L if th is Theorem.DET_RATE else None)
            for th in Theorem]


def guide_exponents(cfg: ExperimentConfig, reports: list[TheoremReport]) -> tuple[str | None, dict]:
    """Exponents for the dashed guide lines: the theorem matching the variant that applies."""
    by_id = {r.theorem_id: r for r in reports}
    variant = Variant(cfg["optimizer.variant"])
    if variant is Variant.VANILLA_SGD:
        return None, {}
    order = [Theorem.DET_RATE] if variant is Variant.REG_GD else [Theorem.AS_RATE, Theorem.L2_RATE]
    for th in order:
        if by_id[th].applies:
            return th.value, by_id[th].predicted_exponents
    return None, {}


@dataclass
class FittedRates:
    rates: dict

    def lines(self) -> list[str]:
        return [f"  {name:20s} {est if isinstance(est, RateEstimate) else est}" for name, est in self.rates.items()]


def fit_rates(traj: Trajectory, tail_fraction: float = 0.5) -> FittedRates:
    out = {}
    ks = traj.iterations
    for name in ("f_gap", "dist_sq_to_xstar", "dist_sq_to_xlambda", "energy"):
        vals = getattr(traj, name)
        if not np.any(np.isfinite(vals)):
            continue
        try:
            out[name] = estimate_rate(ks[1:], vals[1:], tail_fraction)
        except InsufficientDataError as exc:
            out[name] = f"no fit ({exc})"
    return FittedRates(out)


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
