"""Regularized vs plain SGD on f(x) = (x1 + x2 - 1)^2 / 2.

Every point on the line x1 + x2 = 1 minimizes f; the minimum-norm one is
(1/2, 1/2).  Plain SGD reaches the line but drifts along it under noise, while
the decaying Tikhonov term pulls the iterates towards (1/2, 1/2).

Run: python demos/toy_quadratic.py
"""

from fractions import Fraction as F

import numpy as np

from regsgd.analysis import estimate_rate
from regsgd.noise import NoiseModel
from regsgd.optimizer import OptimizerConfig, monte_carlo
from regsgd.oracles import make_oracle
from regsgd.problems import toy_problem
from regsgd.schedules import PolynomialSchedule, Theorem, predicted_rates

N, REPLICAS, SEED = 20_000, 20, 1

problem = toy_problem()
oracle = make_oracle(problem)
noise = NoiseModel("GAUSSIAN_ISO", 0.1)
reg = PolynomialSchedule(0.1, F(2, 3), 1, F(1, 9))
plain = PolynomialSchedule(0.1, F(1, 2), 0, 0)

print("minimum-norm solution:", oracle.x_star)
print(predicted_rates(reg, Theorem.AS_RATE, xi=1))

for name, sched, variant in [("reg-SGD", reg, "REG_SGD"), ("plain SGD", plain, "VANILLA_SGD")]:
    cfg = OptimizerConfig(sched, noise, n_iterations=N, variant=variant, x0="gaussian")
    mean, reps = monte_carlo(problem, cfg, REPLICAS, SEED, oracle=oracle)
    finals = np.array([t.dist_sq_to_xstar[-1] for t in reps])
    rate = estimate_rate(mean.iterations[1:], mean.dist_sq_to_xstar[1:])
    print(f"{name:10s} median |X_N - x*|^2 = {np.median(finals):.3e}   "
          f"median f gap = {np.median([t.f_gap[-1] for t in reps]):.2e}   fitted exponent {rate.exponent:.3f}")
