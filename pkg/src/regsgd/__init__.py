"""Regularized stochastic gradient descent with a decaying Tikhonov weight."""

from .noise import NoiseKind, NoiseModel, RngStream, sample_noise
from .optimizer import DivergenceError, OptimizerConfig, Trajectory, Variant, monte_carlo, run
from .problems import LinearProblem, Objective, ode_problem, radon_problem, stochastic_gradient, toy_problem
from .schedules import (Mode, PolynomialSchedule, Theorem, TheoremReport, optimal_schedule,
                        predicted_rates, schedule_at, validate_theorem)

__version__ = "0.1.0"

__all__ = [
    "NoiseKind", "NoiseModel", "RngStream", "sample_noise",
    "DivergenceError", "OptimizerConfig", "Trajectory", "Variant", "monte_carlo", "run",
    "LinearProblem", "Objective", "ode_problem", "radon_problem", "stochastic_gradient", "toy_problem",
    "Mode", "PolynomialSchedule", "Theorem", "TheoremReport", "optimal_schedule",
    "predicted_rates", "schedule_at", "validate_theorem",
]
