from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regsgd.schedules import (Mode, PolynomialSchedule, Theorem, optimal_schedule, predicted_rates,
                              schedule_arrays, schedule_at, validate_theorem)


def sched(p, q, ca=1.0, cl=1.0):
    return PolynomialSchedule(ca, q, cl, p)


# -- schedule_at -------------------------------------------------------------------

def test_schedule_at_constant_step_harmonic_reg():
    assert schedule_at(PolynomialSchedule(1, 0, 1, 1), 4) == (1.0, 0.25)


def test_schedule_at_first_index():
    a, lam = schedule_at(PolynomialSchedule(20, F(2, 3), 0.01, F(1, 3)), 1)
    assert (a, lam) == (20.0, 0.01)


def test_schedule_at_hand_value():
    a, lam = schedule_at(PolynomialSchedule(100, F(2, 3), 0.001, F(1, 3)), 8)
    assert a == pytest.approx(25.0, rel=1e-14)
    assert lam == pytest.approx(0.0005, rel=1e-14)


def test_schedule_at_rejects_zero():
    with pytest.raises(ValueError):
        schedule_at(sched(0.5, 0.6), 0)


@pytest.mark.parametrize("kw", [dict(c_alpha=0), dict(c_lambda=-1), dict(q=1.0), dict(p=1.5),
                                dict(c_alpha=float("nan"))])
def test_invalid_schedule_fields(kw):
    base = dict(c_alpha=1.0, q=0.5, c_lambda=1.0, p=0.25)
    base.update(kw)
    with pytest.raises(ValueError):
        PolynomialSchedule(**base)


@settings(max_examples=60, deadline=None)
@given(ca=st.floats(1e-3, 1e3), q=st.floats(0, 0.999), cl=st.floats(0, 1e3), p=st.floats(0, 1),
       k=st.integers(1, 10**6))
def test_schedule_non_increasing(ca, q, cl, p, k):
    s = PolynomialSchedule(ca, q, cl, p)
    a0, l0 = schedule_at(s, k)
    a1, l1 = schedule_at(s, k + 1)
    assert a1 <= a0 and l1 <= l0
    if cl > 0 and p >= 1e-3:  # smaller p is flat to double precision
        assert l1 < l0 or l0 < 1e-300


@pytest.mark.parametrize("p", [0.1, 0.5, 1.0])
def test_lemma_b4_difference_bounds(p):
    k = np.arange(1, 10**4 + 1, dtype=float)
    _, lam = schedule_arrays(PolynomialSchedule(1.0, 0.0, 1.0, p), np.append(k, k[-1] + 1))
    diff = lam[:-1] - lam[1:]
    lo, hi = p / (k + 1) ** (p + 1), p / k ** (p + 1)
    assert np.all(diff >= lo * (1 - 1e-12))
    assert np.all(diff <= hi * (1 + 1e-12))


# -- validate_theorem ----------------------------------------------------------------

def test_as_rate_applies_for_comparison_schedule():
    r = validate_theorem(sched(0.111, 0.667), Theorem.AS_RATE, beta=0.3)
    assert r.applies and not r.violated_conditions


def test_l2_rate_rejects_fast_decay():
    r = validate_theorem(sched(0.67, 0.5), Theorem.L2_RATE)
    assert not r.applies
    assert any("q > p" in v for v in r.violated_conditions)


def test_l2_general_needs_positive_p():
    r = validate_theorem(sched(0, 0.667), Theorem.L2_GENERAL)
    assert not r.applies
    assert any("p > 0" in v for v in r.violated_conditions)


def test_l2_general_notes_problem_dependent_route():
    r = validate_theorem(sched(0.2, 0.5), Theorem.L2_GENERAL)
    assert r.applies
    assert any("viscosity_gap_series" in n for n in r.notes)


def test_beta_ignored_with_note():
    r = validate_theorem(sched(0.25, 0.5), Theorem.L2_RATE, beta=0.1)
    assert r.applies
    assert any("beta" in n for n in r.notes)


def test_unknown_theorem():
    with pytest.raises(ValueError):
        validate_theorem(sched(0.25, 0.5), "NOPE")


def test_boundary_exact_rational():
    # q = 1 - p exactly; needs 2 C_lambda C_alpha > 1 - q = 1/3
    ok = validate_theorem(PolynomialSchedule(1, F(2, 3), F(1, 5), F(1, 3)), Theorem.L2_RATE)
    bad = validate_theorem(PolynomialSchedule(1, F(2, 3), F(1, 6), F(1, 3)), Theorem.L2_RATE)
    assert ok.applies
    assert not bad.applies and any("boundary" in v for v in bad.violated_conditions)


def test_boundary_float_tolerance():
    r = validate_theorem(PolynomialSchedule(1, 2 / 3, 0.1, 1 / 3), Theorem.L2_RATE)
    assert not r.applies  # treated as on the boundary, 2 * 0.1 < 1/3


def test_det_rate_conditions():
    s = PolynomialSchedule(1.5, 0, 1, 0.5)
    assert validate_theorem(s, Theorem.DET_RATE, smoothness_L=1.0).applies
    assert not validate_theorem(s, Theorem.DET_RATE, smoothness_L=2.0).applies
    r = validate_theorem(s, Theorem.DET_RATE)
    assert r.applies and any("L not supplied" in n for n in r.notes)
    # q = 0, p = 1 needs 2 C_lambda C_alpha (1 - L C_alpha / 2) > 1
    assert not validate_theorem(PolynomialSchedule(1, 0, 1, 1), Theorem.DET_RATE, smoothness_L=1).applies
    assert validate_theorem(PolynomialSchedule(1, 0, 2, 1), Theorem.DET_RATE, smoothness_L=1).applies


@settings(max_examples=200, deadline=None)
@given(p=st.floats(0, 1), q=st.floats(0, 0.999), th=st.sampled_from(list(Theorem)))
def test_applies_iff_no_violations(p, q, th):
    r = predicted_rates(sched(p, q), th, xi=0.5, smoothness_L=1.0)
    assert r.applies == (not r.violated_conditions)
    for v in r.predicted_exponents.values():
        assert v is None or 0 < v <= 1
    if not r.applies:
        assert all(v is None for v in r.predicted_exponents.values())


# -- predicted_rates -----------------------------------------------------------------

def test_l2_optimal_rate_quarter():
    r = predicted_rates(PolynomialSchedule(1, F(5, 8), 1, F(1, 4)), Theorem.L2_RATE, xi=F(1, 4))
    assert r.predicted_exponents["dist_to_xstar"] == F(1, 8)


def test_as_optimal_rate_quarter():
    q = F(2, 3)
    r = predicted_rates(PolynomialSchedule(1, q, 1, F(2, 9)), Theorem.AS_RATE, xi=F(1, 4),
                        beta=2 * q - 1 - F(1, 10**9))
    assert r.predicted_exponents["dist_to_xstar"] == pytest.approx(1 / 9, abs=1e-8)
    assert r.predicted_exponents["dist_to_xstar"] < F(1, 9)


def test_l2_f_gap_third():
    r = predicted_rates(PolynomialSchedule(1, F(2, 3), 1, F(1, 3)), Theorem.L2_RATE)
    assert r.predicted_exponents["f_gap"] == F(1, 3)


def test_det_rates():
    r = predicted_rates(PolynomialSchedule(1, 0, 1, F(1, 2)), Theorem.DET_RATE, xi=F(1, 2), smoothness_L=1)
    ex = r.predicted_exponents
    assert ex["energy"] == 1 and ex["f_gap"] == F(1, 2)
    assert ex["dist_to_xlambda"] == F(1, 2) and ex["dist_to_xstar"] == F(1, 2)


def test_inapplicable_has_no_exponents():
    r = predicted_rates(sched(0.67, 0.5), Theorem.L2_RATE, xi=1)
    assert not r.applies
    assert all(v is None for v in r.predicted_exponents.values())


@settings(max_examples=100, deadline=None)
@given(p=st.floats(0.01, 0.49), q=st.floats(0.02, 0.98), xi1=st.floats(0.05, 2), xi2=st.floats(0.05, 2),
       th=st.sampled_from([Theorem.L2_RATE, Theorem.AS_RATE, Theorem.DET_RATE]))
def test_rates_monotone_in_xi(p, q, xi1, xi2, th):
    lo, hi = sorted([xi1, xi2])
    a = predicted_rates(sched(p, q), th, xi=lo, smoothness_L=1.0).predicted_exponents["dist_to_xstar"]
    b = predicted_rates(sched(p, q), th, xi=hi, smoothness_L=1.0).predicted_exponents["dist_to_xstar"]
    if a is not None:
        assert b is not None and b >= a


def test_xi_must_be_positive():
    with pytest.raises(ValueError):
        predicted_rates(sched(0.2, 0.5), Theorem.L2_RATE, xi=0)


# -- optimal_schedule ------------------------------------------------------------------

def test_optimal_as_xi_one():
    assert optimal_schedule(1, Mode.AS) == (F(1, 9), F(2, 3), F(2, 9))


def test_optimal_l2_xi_one():
    assert optimal_schedule(1, "L2") == (F(1, 7), F(4, 7), F(2, 7))


def test_optimal_det_quarter():
    assert optimal_schedule(F(1, 4), Mode.DET) == (F(2, 3), 0, F(1, 3))


def test_optimal_rejects_nonpositive():
    with pytest.raises(ValueError):
        optimal_schedule(0, Mode.L2)


@settings(max_examples=100, deadline=None)
@given(num=st.integers(1, 40), den=st.integers(1, 40), mode=st.sampled_from(list(Mode)))
def test_optimal_schedule_validates(num, den, mode):
    xi = F(num, den)
    p, q, rate = optimal_schedule(xi, mode)
    s = PolynomialSchedule(1, q, 1, p)
    if mode is Mode.AS:
        r = predicted_rates(s, Theorem.AS_RATE, xi=xi, beta=2 * q - 1 - F(1, 10**6))
        assert r.applies
        assert r.predicted_exponents["dist_to_xstar"] == pytest.approx(float(rate), abs=2e-6)
    elif mode is Mode.L2:
        r = predicted_rates(s, Theorem.L2_RATE, xi=xi)
        assert r.applies
        assert r.predicted_exponents["dist_to_xstar"] == rate
    else:
        r = predicted_rates(PolynomialSchedule(1, q, 3, p), Theorem.DET_RATE, xi=xi, smoothness_L=1)
        assert r.applies
        assert r.predicted_exponents["dist_to_xstar"] == rate
