"""Command line entry point: ``regsgd {run,validate,sweep,oracle}``.

Exit status: 0 success, 2 configuration error, 3 every replica diverged,
4 I/O error, 5 problem too large for the dense oracle.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from ..analysis import empirical_sweep, heatmap_csv, theoretical_heatmap
from ..io import write_matrix
from ..optimizer import monte_carlo
from ..oracles import decompose, make_oracle, min_norm_solution, viscosity_curve
from ..problems import LinearProblem
from ..schedules import PolynomialSchedule, Theorem, predicted_rates
from . import svg
from .config import ConfigError, _number, dump_config, expand_grid, load_config
from .experiment import (build_optimizer_config, build_problem, build_version, config_digest,
                         fit_rates, guide_exponents, theorem_reports, trajectory_csv, write_text)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO, EXIT_ORACLE = 0, 2, 3, 4, 5


class OracleSizeError(RuntimeError):
    pass


def _out_dir(cfg, args) -> Path:
    return Path(args.out) if args.out else Path(cfg["run.output_dir"])


def _load(args):
    cfg = load_config(args.config)
    over = {}
    if getattr(args, "seed", None) is not None:
        over["run.master_seed"] = args.seed
    if getattr(args, "replicas", None) is not None:
        if args.replicas < 1:
            raise ConfigError("--replicas must be >= 1")
        over["run.n_replicas"] = args.replicas
    return cfg.with_overrides(over) if over else cfg


def _guide(ks, ys, exponent):
    """Dashed line ``c k^-exponent`` through the last finite point."""
    ok = np.isfinite(ys) & (ys > 0) & (ks > 0)
    if exponent is None or not ok.any():
        return None
    k_end, y_end = ks[ok][-1], ys[ok][-1]
    kk = ks[ks > 0]
    return svg.Series(f"theory k^-{float(exponent):.3g}", kk, y_end * (kk / k_end) ** -float(exponent), dashed=True)


def cmd_run(args) -> int:
    cfg = _load(args)
    problem = build_problem(cfg)
    ocfg = build_optimizer_config(cfg)
    out = _out_dir(cfg, args)
    emit = {e.strip() for e in cfg["run.emit"].split(",")}
    digest, version = config_digest(cfg), build_version()

    reports = theorem_reports(cfg, problem.smoothness_L)
    for r in reports:
        print(r)
        if not r.applies and r.theorem_id in (Theorem.L2_RATE, Theorem.AS_RATE):
            print(f"warning: schedule fails {r.theorem_id.value}: {'; '.join(r.violated_conditions)}")
    guide_th, guide_ex = guide_exponents(cfg, reports)

    oracle = make_oracle(problem, cfg["oracle.max_svd_dim"])
    mean, reps = monte_carlo(problem, ocfg, cfg["run.n_replicas"], cfg["run.master_seed"], oracle=oracle)

    write_text(out / "config.txt", dump_config(cfg))
    if "csv" in emit:
        for i, t in enumerate(reps):
            write_text(out / f"replica_{i:03d}.csv", trajectory_csv(t))
        write_text(out / "mean.csv", trajectory_csv(mean))
    if mean.final_iterate is not None:
        shape = problem.metadata.get("image_shape")
        write_matrix(out / "x_final.txt", mean.final_iterate.reshape(shape) if shape else mean.final_iterate)
    if "svg" in emit:
        ks = mean.iterations.astype(float)
        for field, key, label in [("dist_sq_to_xstar", "dist_to_xstar", "|X_k - x*|^2"),
                                  ("f_gap", "f_gap", "f(X_k) - f*")]:
            ys = getattr(mean, field)
            series = [svg.Series(f"mean of {len(reps) - len(mean.diverged_replicas)}", ks, ys)]
            g = _guide(ks, ys, guide_ex.get(key))
            if g is not None:
                series.append(g)
            text = svg.loglog_plot(series, title=f"{problem.name}: {label}", ylabel=label,
                                   digest=digest, version=version)
            write_text(out / f"{field}.svg", text)

    if mean.diverged_replicas:
        print(f"diverged replicas: {mean.diverged_replicas}")
    if len(mean.diverged_replicas) == len(reps):
        print("error: every replica diverged", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"fitted exponents of the mean (guide: {guide_th or 'none'}):")
    for line in fit_rates(mean).lines():
        print(line)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        p, q = _number(args.p), _number(args.q)
        xi = _number(args.xi) if args.xi is not None else None
        beta = _number(args.beta) if args.beta is not None else None
        s = PolynomialSchedule(_number(args.c_alpha), q, _number(args.c_lambda), p)
        L = float(_number(args.L)) if args.L is not None else None
        for th in Theorem:
            print(predicted_rates(s, th, xi=xi, beta=beta if th is Theorem.AS_RATE else None,
                                  smoothness_L=L if th is Theorem.DET_RATE else None))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg, args)
    digest, version = config_digest(cfg), build_version()
    p_grid, q_grid = expand_grid(cfg["sweep.p_grid"]), expand_grid(cfg["sweep.q_grid"])
    xi = cfg.get("sweep.xi")
    if xi is None:
        raise ConfigError("sweep.xi is required")
    mode = cfg["sweep.mode"]
    if cfg["sweep.empirical"]:
        cells = p_grid.size * q_grid.size
        if cells > cfg["sweep.max_cells"]:
            raise ConfigError(f"empirical sweep has {cells} cells, cap is {cfg['sweep.max_cells']}")
        problem = build_problem(cfg)
        result = empirical_sweep(problem, build_optimizer_config(cfg), p_grid, q_grid,
                                 cfg["run.n_replicas"], cfg["run.master_seed"],
                                 tail_fraction=float(cfg["sweep.tail_fraction"]), xi=float(xi), mode=mode,
                                 oracle=make_oracle(problem, cfg["oracle.max_svd_dim"]))
        for (i, j), note in sorted(result.notes.items()):
            print(f"cell p={p_grid[i]:g} q={q_grid[j]:g}: {note}")
    else:
        result = theoretical_heatmap(mode, float(xi), p_grid, q_grid)
    write_text(out / "heatmap.csv", heatmap_csv(result))
    if result.theoretical is not None:
        i, j = np.unravel_index(np.nanargmax(result.theoretical), result.theoretical.shape)
        write_text(out / "heatmap_theoretical.svg",
                   svg.heatmap_plot(p_grid, q_grid, result.theoretical, f"{mode} predicted exponent, xi={float(xi):g}",
                                    mark=(i, j), digest=digest, version=version))
        p, q, v = result.argmax
        print(f"{mode} xi={float(xi):g}: max predicted exponent {v:.6g} at p={p:.6g}, q={q:.6g}")
    if result.empirical is not None:
        write_text(out / "heatmap_empirical.svg",
                   svg.heatmap_plot(p_grid, q_grid, result.empirical, "fitted exponent of mean |X_k - x*|^2",
                                    digest=digest, version=version))
        for i, p in enumerate(p_grid):
            for j, q in enumerate(q_grid):
                e = result.empirical[i, j]
                t = result.theoretical[i, j] if result.theoretical is not None else float("nan")
                print(f"p={p:g} q={q:g}: fitted {e:.4f}  predicted {t:.4f}")
    print(f"wrote {out}")
    return EXIT_OK


def _linear_view(problem):
    if isinstance(problem, LinearProblem):
        return problem
    form = problem.metadata.get("linear_form")
    if form is None:
        raise ConfigError(f"{problem.name} has no linear form for the oracle")
    return LinearProblem(form[0], form[1], name=problem.name)


def cmd_oracle(args) -> int:
    cfg = _load(args)
    problem = build_problem(cfg)
    cap = cfg["oracle.max_svd_dim"]
    if problem.dimension > cap:
        raise OracleSizeError(f"dimension {problem.dimension} exceeds the dense oracle cap {cap}")
    lin = _linear_view(problem)
    dec = decompose(lin.operator_A)
    x_star = min_norm_solution(dec, lin.data_y)
    lambdas = np.sort(expand_grid(cfg["oracle.lambdas"]))[::-1]
    curve = viscosity_curve(dec, lin.data_y, lambdas)
    out = _out_dir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    shape = problem.metadata.get("image_shape")
    write_matrix(out / "x_star.txt", x_star.reshape(shape) if shape else x_star)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "dist_to_xstar", "norm_gap"])
    for pt in curve:
        w.writerow([repr(pt.lam), repr(pt.dist_to_xstar), repr(pt.norm_gap)])
    write_text(out / "viscosity.csv", buf.getvalue())
    print(f"rank {dec.rank} of {min(lin.operator_A.shape)}, |x*| = {np.linalg.norm(x_star):.6g}")
    if curve.xi_hat is not None:
        print(f"fitted xi = {curve.xi_hat:.4f}")
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="regsgd", description="Regularized SGD experiments and schedule checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--out", help="output directory (overrides run.output_dir)")
        if seed:
            p.add_argument("--seed", type=int, help="master seed override")
            p.add_argument("--replicas", type=int, help="number of replicas override")

    common(sub.add_parser("run", help="run a Monte Carlo experiment"))
    v = sub.add_parser("validate", help="check a schedule against every theorem")
    v.add_argument("--p", required=True)
    v.add_argument("--q", required=True)
    v.add_argument("--xi")
    v.add_argument("--beta")
    v.add_argument("--c-alpha", default="1")
    v.add_argument("--c-lambda", default="1")
    v.add_argument("--L", help="smoothness constant for the deterministic conditions")
    common(sub.add_parser("sweep", help="predicted (and optionally fitted) exponents over a (p, q) grid"))
    common(sub.add_parser("oracle", help="minimum-norm solution and Tikhonov path"), seed=False)
    return ap


COMMANDS = {"run": cmd_run, "validate": cmd_validate, "sweep": cmd_sweep, "oracle": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleSizeError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
