import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lienard_infinity.integrals import (
    I_branch,
    I_branch_between,
    I_branch_infinity,
    I_star_direct,
    I_total,
    infinity_behavior,
    leading_divergence,
)
from lienard_infinity.model import LienardSystem, Side, validate

import oracles
from systems import ABOVE_JA2, CRIT, SYM11, SYM15, T11A, T11B, T12A, T12B, T13A

TOL = 1e-10


def test_closed_form_quadratic():
    assert I_branch(SYM11, 1.0, Side.MINUS).value == pytest.approx(-2.0, abs=1e-12)
    assert I_branch(SYM11, 3.5, Side.PLUS).value == pytest.approx(-7.0, abs=1e-12)


def test_zero_at_zero():
    assert I_branch(T11A, 0.0, Side.MINUS).value == 0.0
    assert I_branch(T11A, 1e-12, Side.PLUS).value == pytest.approx(-2e-12, rel=1e-5)
    assert abs(I_total(T11A, 1e-12).value) < 1e-12


def test_simpson_oracle_quartic():
    for side in ("plus", "minus"):
        ref = oracles.I_branch(T11A, 10.0, side)
        assert I_branch(T11A, 10.0, side).value == pytest.approx(ref, abs=1e-8)
    ref = oracles.I_branch(T11A, 10.0, "minus") - oracles.I_branch(T11A, 10.0, "plus")
    assert I_total(T11A, 10.0).value == pytest.approx(ref, abs=1e-8)


def _random_valid(rng):
    while True:
        n = int(rng.choice([1, 3, 5, 7]))
        m = int(rng.integers(1, 8))
        b = [0.0, 0.0] + [float(v) for v in rng.uniform(-0.6, 1.2, n - 1)]
        a = [0.0] + [float(v) for v in rng.uniform(-0.6, 1.2, m - 1)]
        if m > 1:
            a[1] = abs(a[1]) + 0.2
        if n > 1:
            b[2] = abs(b[2]) + 0.2
        s = LienardSystem(n, m, 1.0, tuple(b), tuple(a))
        if validate(s).ok:
            return s


def test_simpson_oracle_random_systems():
    rng = np.random.default_rng(20240601)
    for _ in range(20):
        s = _random_valid(rng)
        y = float(10 ** rng.uniform(0, 3))
        for side in ("minus", "plus"):
            ref = oracles.I_branch(s, y, side, panels=10 ** 6)
            got = I_branch(s, y, side, TOL).value
            assert got == pytest.approx(ref, abs=1e-8, rel=1e-12), (s, y, side)


@pytest.mark.parametrize("system", [T11A, T12A, T13A, CRIT, ABOVE_JA2])
def test_strictly_decreasing_and_negative(system):
    ys = np.geomspace(0.1, 1e4, 50)
    for side in (Side.MINUS, Side.PLUS):
        v = np.array([I_branch(system, y, side).value for y in ys])
        assert np.all(v < 0)
        assert np.all(np.diff(v) < 0)


@pytest.mark.parametrize("system", [SYM11, SYM15, LienardSystem(3, 5, 1.0, (0, 0, 0.7, 0), (0, 1, 0, 0.3, 0))])
def test_symmetric_total_vanishes(system):
    for y in np.geomspace(0.5, 1e6, 12):
        assert abs(I_total(system, y, TOL).value) <= 10 * TOL


def test_between_is_difference():
    d = I_branch_between(T11A, 5.0, 50.0, Side.PLUS).value
    assert d == pytest.approx(I_branch(T11A, 50.0, Side.PLUS).value - I_branch(T11A, 5.0, Side.PLUS).value, abs=1e-9)


def test_divergence_sign_from_leading_term():
    assert leading_divergence(T11A) == 1  # b_3 (m - n + 2 j_b + 1) < 0
    ib = infinity_behavior(T11A)
    assert ib.kind == "DivergesPlusInfinity"
    vals = [oracles.I_branch(T11A, y, "minus", 2 * 10 ** 5) - oracles.I_branch(T11A, y, "plus", 2 * 10 ** 5)
            for y in (1e3, 1e4, 1e5)]
    assert vals[0] < vals[1] < vals[2]


def test_symmetric_limits():
    ib = infinity_behavior(SYM11)
    assert ib.minus_kind == ib.plus_kind == "DivergesMinusInfinity"
    ib = infinity_behavior(SYM15)
    assert ib.kind == "ConvergesTo"
    assert ib.I_minus_inf.value == pytest.approx(ib.I_plus_inf.value, abs=1e-12)
    assert np.isfinite(ib.I_minus_inf.value)
    assert abs(ib.I_star.value) <= 1e-12


@pytest.mark.parametrize("system", [CRIT, T11B, T12B])
def test_ladder_agrees_with_improper_integral(system):
    ib = infinity_behavior(system)
    assert ib.kind == "ConvergesTo"
    assert ib.I_star.value == pytest.approx(I_star_direct(system).value, abs=1e-8)


def test_above_branch_limits_approach_monotonically():
    lim = I_branch_infinity(ABOVE_JA2, Side.MINUS).value
    gaps = [abs(I_branch(ABOVE_JA2, 2.0 ** k, Side.MINUS).value - lim) for k in range(2, 30, 3)]
    assert all(g2 < g1 for g1, g2 in zip(gaps, gaps[1:]))


def test_balanced_template_root():
    # a_1 = (a_2 / a_4)^2 balances n = 1, m = 5, a = (0, a_1, a_2, 0, a_4)
    assert abs(I_star_direct(ABOVE_JA2).value) < 1e-12


@settings(max_examples=25, deadline=None)
@given(b3=st.floats(-0.6, 0.6), a2=st.floats(-0.8, 0.8), y=st.floats(0.5, 500))
def test_mirror_flips_sign_of_total(b3, a2, y):
    s = LienardSystem(3, 3, 1.0, (0, 0, 1, b3), (0, 1, a2))
    t = LienardSystem(3, 3, 1.0, (0, 0, 1, -b3), (0, 1, -a2))
    if not (validate(s).ok and validate(t).ok):
        return
    assert I_total(t, y).value == pytest.approx(-I_total(s, y).value, abs=10 * TOL)
