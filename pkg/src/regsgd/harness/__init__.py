"""Configuration, command line and artifact writers."""

from .config import ConfigError, ExperimentConfig, dump_config, load_config, parse_config
from .experiment import build_optimizer_config, build_problem, trajectory_csv

__all__ = ["ConfigError", "ExperimentConfig", "dump_config", "load_config", "parse_config",
           "build_optimizer_config", "build_problem", "trajectory_csv"]
