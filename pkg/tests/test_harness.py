import re
from fractions import Fraction as F
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regsgd.harness.cli import main
from regsgd.harness.config import ConfigError, dump_config, expand_grid, load_config, parse_config
from regsgd.harness.experiment import CSV_HEADER, build_problem, config_digest, read_trajectory_csv
from regsgd.io import MatrixFormatError, read_matrix, write_matrix

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL_TOY = """\
problem.kind = toy
schedule.c_alpha = 0.1
schedule.q = 2/3
schedule.c_lambda = 1
schedule.p = 1/9
optimizer.n_iterations = 2000
noise.kind = GAUSSIAN_ISO
noise.sigma = 0.1
theory.xi = 1
run.n_replicas = 3
run.master_seed = 12
"""


def write_cfg(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- config -------------------------------------------------------------------------

def test_defaults_and_fractions():
    cfg = parse_config(SMALL_TOY)
    assert cfg["schedule.q"] == F(2, 3)
    assert cfg["schedule.c_alpha"] == 0.1
    assert cfg["run.n_replicas"] == 3
    assert cfg["optimizer.variant"] == "REG_SGD"


@pytest.mark.parametrize("text,msg", [
    ("schedule.r = 1", "unknown key"),
    ("schedule.q = 1\nschedule.q = 2", "duplicate"),
    ("schedule.q", "expected 'key = value'"),
    ("run.n_replicas = 2.5", "integer"),
    ("run.n_replicas = 0", ">= 1"),
    ("noise.kind = CAUCHY", "expected one of"),
    ("problem.kind = linear", "matrix_path"),
    ("problem.kind = linear\nproblem.matrix_path = nope.txt\nproblem.y_path = nope.txt", "file not found"),
    ("optimizer.record_stride = -3", "record_stride"),
    ("sweep.p_grid = linspace(0, 1)", "not a number"),
    ("schedule.q = 1/0", "zero denominator"),
])
def test_config_errors(tmp_path, text, msg):
    with pytest.raises(ConfigError, match=re.escape(msg)):
        parse_config(text, tmp_path)


def test_paths_resolve_relative_to_config(tmp_path):
    write_matrix(tmp_path / "A.txt", np.eye(2))
    write_matrix(tmp_path / "y.txt", np.ones((2, 1)))
    p = write_cfg(tmp_path, "problem.kind = linear\nproblem.matrix_path = A.txt\nproblem.y_path = y.txt\n")
    prob = build_problem(load_config(p))
    assert prob.dimension == 2 and prob.n_blocks == 2


def test_grids():
    np.testing.assert_allclose(expand_grid("uniform(4)"), [0, 0.25, 0.5, 0.75])
    np.testing.assert_allclose(expand_grid("linspace(0, 1, 3)"), [0, 0.5, 1])
    np.testing.assert_allclose(expand_grid("logspace(0,-2,3)"), [1, 0.1, 0.01])
    np.testing.assert_allclose(expand_grid("0.111, 0, 2/3"), [0.111, 0, 2 / 3])


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.cfg")))
def test_bundled_configs_round_trip(name):
    cfg = load_config(CONFIGS / name)
    text = dump_config(cfg)
    again = parse_config(text, CONFIGS)
    assert again == cfg
    assert dump_config(again) == text


_values = {
    "schedule.c_alpha": st.one_of(st.fractions(min_value=F(1, 50), max_value=100, max_denominator=50),
                                  st.floats(1e-3, 1e3)),
    "schedule.q": st.fractions(min_value=0, max_value=F(29, 30), max_denominator=30),
    "schedule.p": st.floats(0, 1),
    "noise.sigma": st.floats(0, 10),
    "run.master_seed": st.integers(0, 2**64 - 1),
    "optimizer.n_iterations": st.integers(0, 10**7),
    "optimizer.variant": st.sampled_from(["REG_SGD", "REG_GD", "VANILLA_SGD"]),
    "sweep.p_grid": st.sampled_from(["uniform(10)", "linspace(0, 1/2, 5)", "0.1, 1/3", "logspace(-2,0,4)"]),
    "run.emit": st.sampled_from(["csv", "svg,csv", "heatmap, svg"]),
    "sweep.empirical": st.booleans(),
}


@settings(max_examples=60, deadline=None)
@given(st.fixed_dictionaries({}, optional=_values))
def test_round_trip_property(values):
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(v)
        return str(v)
    text = "".join(f"{k} = {fmt(v)}\n" for k, v in values.items())
    cfg = parse_config(text)
    assert parse_config(dump_config(cfg)) == cfg


def test_overrides():
    cfg = parse_config(SMALL_TOY)
    assert cfg.with_overrides({"run.master_seed": 5})["run.master_seed"] == 5
    with pytest.raises(ConfigError):
        cfg.with_overrides({"nope.key": 1})


# -- matrix files ----------------------------------------------------------------------

@pytest.mark.parametrize("suffix", [".txt", ".bin"])
def test_matrix_round_trip(tmp_path, suffix):
    M = np.random.default_rng(0).standard_normal((3, 5))
    write_matrix(tmp_path / f"m{suffix}", M)
    np.testing.assert_array_equal(read_matrix(tmp_path / f"m{suffix}"), M)


def test_matrix_format_errors(tmp_path):
    (tmp_path / "bad.txt").write_text("2 2\n1 2 3\n")
    with pytest.raises(MatrixFormatError):
        read_matrix(tmp_path / "bad.txt")
    (tmp_path / "hdr.txt").write_text("two rows\n1\n")
    with pytest.raises(MatrixFormatError):
        read_matrix(tmp_path / "hdr.txt")


# -- CLI -----------------------------------------------------------------------------------

def run_cli(*args):
    return main([str(a) for a in args])


def test_cli_run_outputs(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL_TOY)
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == 0
    text = capsys.readouterr().out
    assert "AS_RATE" in text and "dist_sq_to_xstar" in text
    names = sorted(p.name for p in out.iterdir())
    assert names == ["config.txt", "dist_sq_to_xstar.svg", "f_gap.svg", "mean.csv", "replica_000.csv",
                     "replica_001.csv", "replica_002.csv", "x_final.txt"]
    lines = (out / "mean.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    cols = read_trajectory_csv(out / "replica_000.csv")
    assert cols["k"][0] == 0 and cols["k"][-1] == 2000
    assert np.all(np.isfinite(cols["dist_sq_xstar"]))
    # k = 0 has no step size: empty field, never a zero
    assert lines[1].split(",")[1] == ""
    digest = config_digest(load_config(cfg))
    for svgf in ("f_gap.svg", "dist_sq_to_xstar.svg"):
        svg = (out / svgf).read_text()
        assert svg.startswith("<?xml") and "<svg" in svg
        assert f"config-sha256: {digest}" in svg
        assert "stroke-dasharray" in svg  # theory guide line


def test_cli_run_deterministic(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_TOY)
    run_cli("run", "--config", cfg, "--out", tmp_path / "a")
    run_cli("run", "--config", cfg, "--out", tmp_path / "b")
    for name in ("mean.csv", "replica_000.csv", "replica_002.csv", "config.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def strip_build(p):
        return [l for l in p.read_text().splitlines() if not l.startswith("<!-- build:")]
    assert strip_build(tmp_path / "a" / "f_gap.svg") == strip_build(tmp_path / "b" / "f_gap.svg")


def test_cli_seed_override_changes_output(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_TOY)
    run_cli("run", "--config", cfg, "--out", tmp_path / "a", "--replicas", "1")
    run_cli("run", "--config", cfg, "--out", tmp_path / "b", "--replicas", "1", "--seed", "99")
    assert (tmp_path / "a" / "mean.csv").read_bytes() != (tmp_path / "b" / "mean.csv").read_bytes()
    assert "run.master_seed = 99" in (tmp_path / "b" / "config.txt").read_text()


def test_cli_warns_on_fast_decay(tmp_path, capsys):
    text = SMALL_TOY.replace("schedule.p = 1/9", "schedule.p = 0.67").replace("schedule.q = 2/3", "schedule.q = 0.5")
    cfg = write_cfg(tmp_path, text.replace("optimizer.n_iterations = 2000", "optimizer.n_iterations = 300"))
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "o") == 0
    out = capsys.readouterr().out
    assert "warning: schedule fails L2_RATE" in out and "q > p" in out


def test_cli_missing_matrix_exit_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "problem.kind = linear\nproblem.matrix_path = missing.txt\nproblem.y_path = y.txt\n")
    assert run_cli("run", "--config", cfg) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_all_diverged_exit_3(tmp_path):
    text = SMALL_TOY.replace("schedule.c_alpha = 0.1", "schedule.c_alpha = 5").replace("schedule.q = 2/3", "schedule.q = 0")
    text += "optimizer.x0 = gaussian\noptimizer.variant = REG_GD\n"
    cfg = write_cfg(tmp_path, text)
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "o") == 3


def test_cli_io_error_exit_4(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_TOY.replace("2000", "50"))
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run_cli("run", "--config", cfg, "--out", blocker / "sub") == 4


def test_cli_validate(capsys):
    assert run_cli("validate", "--p", "0.111", "--q", "0.667", "--xi", "1") == 0
    out = capsys.readouterr().out
    m = re.search(r"AS_RATE: applies.*?dist_to_xstar: O\(k\^-([0-9.]+)\)", out, re.S)
    assert m and float(m.group(1)) == pytest.approx(2 / 9, abs=2e-3)
    assert run_cli("validate", "--p", "0.5", "--q", "0.5") == 0
    out = capsys.readouterr().out
    assert re.search(r"L2_RATE: does not apply.*q > p", out, re.S)
    assert run_cli("validate", "--p", "1/4", "--q", "5/8", "--xi", "1/4") == 0
    assert re.search(r"L2_RATE: applies.*?dist_to_xstar: O\(k\^-1/8\)", capsys.readouterr().out, re.S)
    assert run_cli("validate", "--p", "x", "--q", "0.5") == 2


def test_cli_sweep_theoretical(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "sweep.mode = L2\nsweep.xi = 1/4\nsweep.p_grid = uniform(40)\nsweep.q_grid = uniform(40)\n")
    assert run_cli("sweep", "--config", cfg, "--out", tmp_path / "s") == 0
    assert "max predicted exponent 0.125 at p=0.25, q=0.625" in capsys.readouterr().out
    rows = (tmp_path / "s" / "heatmap.csv").read_text().splitlines()
    assert rows[0] == "p,q,theoretical_exponent,empirical_exponent,valid" and len(rows) == 1601
    assert (tmp_path / "s" / "heatmap_theoretical.svg").exists()


def test_cli_sweep_as_xi_one(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "sweep.mode = AS\nsweep.xi = 1\nsweep.p_grid = uniform(90)\nsweep.q_grid = uniform(90)\n")
    assert run_cli("sweep", "--config", cfg, "--out", tmp_path / "s") == 0
    m = re.search(r"at p=([0-9.]+), q=([0-9.]+)", capsys.readouterr().out)
    assert float(m.group(1)) == pytest.approx(1 / 9, abs=1 / 90)
    assert float(m.group(2)) == pytest.approx(2 / 3, abs=1 / 90)


def test_cli_sweep_cap_exit_2(tmp_path):
    cfg = write_cfg(tmp_path, "sweep.xi = 1\nsweep.empirical = true\nsweep.p_grid = uniform(9)\nsweep.q_grid = uniform(9)\n")
    assert run_cli("sweep", "--config", cfg, "--out", tmp_path / "s") == 2


def test_cli_sweep_empirical_small(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_TOY + "sweep.xi = 1\nsweep.mode = AS\nsweep.empirical = true\n"
                    "sweep.p_grid = 1/9, 0\nsweep.q_grid = 2/3\n")
    assert run_cli("sweep", "--config", cfg, "--out", tmp_path / "s") == 0
    rows = (tmp_path / "s" / "heatmap.csv").read_text().splitlines()
    assert len(rows) == 3 and all(r.endswith(",1") for r in rows[1:])
    assert (tmp_path / "s" / "heatmap_empirical.svg").exists()


def test_cli_oracle_toy(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "problem.kind = toy\noracle.lambdas = logspace(-2, -6, 9)\n")
    assert run_cli("oracle", "--config", cfg, "--out", tmp_path / "o") == 0
    np.testing.assert_allclose(read_matrix(tmp_path / "o" / "x_star.txt").ravel(), [0.5, 0.5], rtol=1e-14)
    m = re.search(r"fitted xi = ([0-9.]+)", capsys.readouterr().out)
    assert float(m.group(1)) == pytest.approx(1.0, abs=0.05)
    assert (tmp_path / "o" / "viscosity.csv").read_text().startswith("lambda,dist_to_xstar,norm_gap\n")


def test_cli_oracle_ode_matches_normal_equations(tmp_path):
    cfg = write_cfg(tmp_path, "problem.kind = ode\nproblem.mesh_exponent = 6\nproblem.n_obs = 16\n")
    assert run_cli("oracle", "--config", cfg, "--out", tmp_path / "o") == 0
    x = read_matrix(tmp_path / "o" / "x_star.txt").ravel()
    prob = build_problem(load_config(cfg))
    A, y = prob._dense, prob.data_y
    keep = np.any(A != 0, axis=1)  # the observation at s = 1 is a zero row
    ref = A[keep].T @ np.linalg.solve(A[keep] @ A[keep].T, y[keep])
    assert np.linalg.norm(x - ref) <= 1e-8 * np.linalg.norm(ref)


def test_cli_oracle_size_cap_exit_5(tmp_path):
    cfg = write_cfg(tmp_path, "problem.kind = ode\nproblem.mesh_exponent = 6\noracle.max_svd_dim = 10\n")
    assert run_cli("oracle", "--config", cfg, "--out", tmp_path / "o") == 5
