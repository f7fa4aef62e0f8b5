"""Experiment configuration: a flat ``key = value`` text format.

Grammar
-------
::

    file    := { line }
    line    := blank | comment | entry
    comment := "#" any-text
    entry   := key "=" value [ "#" any-text ]
    key     := section "." name          (for example ``schedule.q``)

Values are plain tokens.  Numbers may be written as fractions (``2/3``),
which keeps exponents exact for the theorem checks.  Grids accept
``linspace(a, b, n)``, ``logspace(a, b, n)``, ``uniform(n)`` (the points
``k/n`` for ``k = 0 .. n-1``) or a comma-separated list.  Relative paths are
resolved against the directory of the config file and must exist.

Unknown keys and repeated keys are errors.  :func:`dump_config` writes every
key in a fixed order, so ``parse_config(dump_config(c)) == c``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config", "dump_config",
           "expand_grid", "SCHEMA"]


class ConfigError(ValueError):
    """Invalid configuration text or values."""


def _number(text: str):
    """Integer, fraction or float; fractions and integers stay exact."""
    t = text.strip()
    if re.fullmatch(r"[+-]?\d+", t):
        return int(t)
    if re.fullmatch(r"[+-]?\d+\s*/\s*\d+", t):
        num, den = (int(x) for x in t.split("/"))
        if den == 0:
            raise ConfigError(f"zero denominator in {text!r}")
        return Fraction(num, den)
    try:
        v = float(t)
    except ValueError as exc:
        raise ConfigError(f"not a number: {text!r}") from exc
    if not np.isfinite(v):
        raise ConfigError(f"not a finite number: {text!r}")
    return v


def _fmt_number(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def _int(text):
    v = _number(text)
    if not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {text!r}")
    return v


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t.upper() in (o.upper() for o in options):
            return next(o for o in options if o.upper() == t.upper())
        raise ConfigError(f"expected one of {', '.join(options)}, got {text!r}")
    return parse


def _str(text):
    return text.strip()


_GRID_RE = re.compile(r"(linspace|logspace)\(([^,]+),([^,]+),([^,]+)\)|uniform\(([^)]+)\)")


def _grid(text):
    t = re.sub(r"\s+", "", text)
    if not t:
        raise ConfigError("empty grid")
    m = _GRID_RE.fullmatch(t)
    if m:
        if m.group(5) is not None:
            n = _int(m.group(5))
            if n < 1:
                raise ConfigError("uniform(n) needs n >= 1")
            return f"uniform({n})"
        a, b, n = _number(m.group(2)), _number(m.group(3)), _int(m.group(4))
        if n < 1:
            raise ConfigError("grid needs at least one point")
        return f"{m.group(1)}({_fmt_number(a)}, {_fmt_number(b)}, {n})"
    return ", ".join(_fmt_number(_number(x)) for x in t.split(","))


def expand_grid(spec: str) -> np.ndarray:
    """Grid points of a (normalized) grid expression."""
    t = re.sub(r"\s+", "", spec)
    m = _GRID_RE.fullmatch(t)
    if m and m.group(5) is not None:
        n = int(m.group(5))
        return np.arange(n) / n
    if m:
        a, b, n = float(_number(m.group(2))), float(_number(m.group(3))), int(m.group(4))
        return np.linspace(a, b, n) if m.group(1) == "linspace" else np.logspace(a, b, n)
    return np.array([float(_number(x)) for x in t.split(",")])


def _emit(text):
    items = sorted({x.strip().lower() for x in text.split(",") if x.strip()})
    bad = set(items) - {"csv", "svg", "heatmap"}
    if bad:
        raise ConfigError(f"unknown emit target(s): {', '.join(sorted(bad))}")
    return ", ".join(items)


_PATH = "path"

# key -> (parser, default); None default means optional and absent
SCHEMA: dict[str, tuple] = {
    "problem.kind": (_choice("toy", "ode", "radon", "linear"), "toy"),
    "problem.mesh_exponent": (_int, 6),
    "problem.n_obs": (_int, 16),
    "problem.rng_seed": (_int, 0),
    "problem.image_size": (_int, 32),
    "problem.n_angles": (_int, 8),
    "problem.n_rays": (_int, 24),
    "problem.image_path": (_PATH, None),
    "problem.matrix_path": (_PATH, None),
    "problem.y_path": (_PATH, None),
    "problem.n_blocks": (_int, None),
    "schedule.c_alpha": (_number, 1),
    "schedule.q": (_number, Fraction(2, 3)),
    "schedule.c_lambda": (_number, 1),
    "schedule.p": (_number, Fraction(1, 3)),
    "optimizer.variant": (_choice("REG_SGD", "REG_GD", "VANILLA_SGD"), "REG_SGD"),
    "optimizer.n_iterations": (_int, 1000),
    "optimizer.batch_size": (_int, 1),
    "optimizer.x0": (_str, "zero"),
    "optimizer.record_stride": (_str, "geometric"),
    "noise.kind": (_choice("NONE", "GAUSSIAN_ISO", "ABC_SCALED"), "NONE"),
    "noise.sigma": (_number, 0),
    "noise.a_coeff": (_number, 0),
    "theory.xi": (_number, None),
    "theory.beta": (_number, None),
    "run.n_replicas": (_int, 1),
    "run.master_seed": (_int, 0),
    "run.output_dir": (_str, "out"),
    "run.emit": (_emit, "csv, svg"),
    "oracle.lambdas": (_grid, "logspace(0, -6, 25)"),
    "oracle.max_svd_dim": (_int, 2048),
    "sweep.mode": (_choice("L2", "AS", "DET"), "L2"),
    "sweep.xi": (_number, None),
    "sweep.p_grid": (_grid, "uniform(50)"),
    "sweep.q_grid": (_grid, "uniform(50)"),
    "sweep.empirical": (_bool, False),
    "sweep.max_cells": (_int, 64),
    "sweep.tail_fraction": (_number, Fraction(1, 2)),
}

_VALUE_FMT = {_int: str, _bool: lambda b: "true" if b else "false"}


@dataclass
class ExperimentConfig:
    """Typed configuration values plus the directory relative paths refer to."""

    values: dict
    base_dir: Path = field(default_factory=Path.cwd, compare=False)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def path(self, key) -> Path | None:
        v = self.values.get(key)
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() else self.base_dir / p

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        """Copy with some dotted keys replaced by already-typed values."""
        vals = dict(self.values)
        for key, v in overrides.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}")
            vals[key] = v
        return ExperimentConfig(vals, self.base_dir)


def parse_config(text: str, base_dir=None, check_paths: bool = True) -> ExperimentConfig:
    """Parse config text; raises :class:`ConfigError` with the offending line number."""
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    vals = {k: default for k, (_, default) in SCHEMA.items()}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        parser = SCHEMA[key][0]
        try:
            vals[key] = value if parser is _PATH else parser(value)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None
        if parser is _PATH and not value:
            raise ConfigError(f"line {lineno}: {key}: empty path")
    cfg = ExperimentConfig(vals, base)
    _check(cfg, check_paths)
    return cfg


def _check(cfg: ExperimentConfig, check_paths: bool):
    kind = cfg["problem.kind"]
    if kind == "linear" and (cfg["problem.matrix_path"] is None or cfg["problem.y_path"] is None):
        raise ConfigError("problem.kind = linear needs problem.matrix_path and problem.y_path")
    stride = cfg["optimizer.record_stride"]
    if stride != "geometric" and not (stride.isdigit() and int(stride) >= 1):
        raise ConfigError("optimizer.record_stride must be 'geometric' or a positive integer")
    if cfg["run.n_replicas"] < 1:
        raise ConfigError("run.n_replicas must be >= 1")
    if not 0 <= cfg["run.master_seed"] < 2**64:
        raise ConfigError("run.master_seed must be a 64-bit unsigned integer")
    x0 = cfg["optimizer.x0"]
    path_keys = [k for k, (parser, _) in SCHEMA.items() if parser is _PATH]
    if x0 not in ("zero", "gaussian"):
        path_keys.append("optimizer.x0")
    if check_paths:
        for key in path_keys:
            p = cfg.path(key)
            if p is not None and not p.exists():
                raise ConfigError(f"{key}: file not found: {p}")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path.parent)


def _format(key, value) -> str:
    parser = SCHEMA[key][0]
    if parser is _number:
        return _fmt_number(value)
    return _VALUE_FMT.get(parser, str)(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical text: every key with a value, in schema order."""
    lines = []
    section = None
    for key in SCHEMA:
        v = cfg.values.get(key)
        if v is None:
            continue
        sec = key.split(".")[0]
        if section is not None and sec != section:
            lines.append("")
        section = sec
        lines.append(f"{key} = {_format(key, v)}")
    return "\n".join(lines) + "\n"
