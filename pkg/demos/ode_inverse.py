"""Recovering a forcing term from 16 exact point values of an ODE solution.

The forward map solves -p'' + p = x on [0, 1] with zero boundary values and
samples p at 16 points.  Most of x is invisible to the data, so the target is
the minimum-norm solution.  This demo runs a shortened version of the
``configs/ode.cfg`` preset and prints the distance to it over time.

Run: python demos/ode_inverse.py
"""

from pathlib import Path

import numpy as np

from regsgd.harness.config import load_config
from regsgd.harness.experiment import build_optimizer_config, build_problem
from regsgd.optimizer import monte_carlo
from regsgd.oracles import make_oracle

root = Path(__file__).resolve().parents[1]
for preset in ("ode.cfg", "ode_vanilla.cfg"):
    cfg = load_config(root / "configs" / preset).with_overrides({"optimizer.n_iterations": 20000,
                                                                  "run.n_replicas": 4})
    problem = build_problem(cfg)
    oracle = make_oracle(problem)
    mean, _ = monte_carlo(problem, build_optimizer_config(cfg), cfg["run.n_replicas"], cfg["run.master_seed"],
                          oracle=oracle)
    print(f"{preset}: d = {problem.dimension}, |x*| = {np.linalg.norm(oracle.x_star):.4f}")
    for k, d in list(zip(mean.iterations, mean.dist_sq_to_xstar))[::10]:
        print(f"  k = {k:6d}  mean |X_k - x*|^2 = {d:.4f}")
