import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lienard_infinity import fractal
from lienard_infinity.charts import J_branch, default_rtilde
from lienard_infinity.errors import NotDivergent, UnbalancedSystem
from lienard_infinity.integrals import I_branch, I_total
from lienard_infinity.model import Direction, LienardSystem, Side, validate
from lienard_infinity.quadrature import EPS
from lienard_infinity.relation import (
    choose_direction,
    defining_residuals,
    generate_orbit,
    generate_orbit_compactified,
    slow_relation,
)

import oracles
from systems import ABOVE_JA2, ABOVE_TEMPLATE, ASYM_LE_CRITICAL, CRIT, SYM11, SYM35, T11A, T12A

TOL = 1e-10


def test_symmetric_identity():
    for s in (SYM11, SYM35):
        assert slow_relation(s, 5.0, Direction.FORWARD) == 5.0
        assert slow_relation(s, 5.0, Direction.INVERSE) == 5.0


def test_forward_matches_bisection_oracle():
    target = oracles.I_branch(T11A, 100.0, "minus", 2 * 10 ** 5)
    s_ref = oracles.bisect(lambda s: target - oracles.I_branch(T11A, s, "plus", 2 * 10 ** 5), 50.0, 100.0, iters=60)
    s = slow_relation(T11A, 100.0, Direction.FORWARD)
    assert s == pytest.approx(s_ref, abs=1e-8)
    assert I_branch(T11A, s, Side.PLUS).value == pytest.approx(I_branch(T11A, 100.0, Side.MINUS).value, abs=1e-9)


def test_round_trip():
    for y in np.geomspace(2.0, 1e6, 15):
        for s in (T11A, CRIT):
            f = slow_relation(s, y, Direction.FORWARD)
            assert slow_relation(s, f, Direction.INVERSE) == pytest.approx(y, rel=1e-10, abs=1e-8)


def test_monotone_map():
    ys = np.geomspace(1.0, 1e5, 30)
    for d in (Direction.FORWARD, Direction.INVERSE):
        out = [slow_relation(T12A, y, d) for y in ys]
        assert np.all(np.diff(out) > 0)


def test_auto_direction_inverse_for_t11a():
    d, why = choose_direction(T11A, 1e3)
    assert d is Direction.INVERSE and "T1.1a" in why
    orb = generate_orbit(T11A, 1e3, "auto", max_iter=40)
    assert orb.direction is Direction.INVERSE
    assert np.all(np.diff(orb.y[: orb.finite_terms]) > 0)
    assert np.all(np.diff(orb.r) < 0)


def test_defining_residuals():
    for system in (T11A, CRIT):
        orb = generate_orbit(system, 1e3, "auto", max_iter=25, finite_terms=None)
        res = defining_residuals(system, orb)
        assert res.size == len(orb) - 1
        scale = np.maximum(1.0, np.abs([I_total(system, y).value for y in orb.y[:-1]]))
        assert np.all(res <= 10 * TOL * scale + 64 * EPS * np.abs([I_branch(system, y, Side.MINUS).value for y in orb.y[1:]]))


def test_finite_and_compactified_orbits_agree():
    y0 = 1e3
    fin = generate_orbit(T11A, y0, Direction.INVERSE, max_iter=30, finite_terms=None)
    comp = generate_orbit_compactified(T11A, y0 ** -0.25, Direction.INVERSE, max_iter=30)
    assert len(fin) == len(comp) == 30
    assert comp.r == pytest.approx(fin.r, rel=1e-8)
    assert comp.y == pytest.approx(fin.y, rel=1e-8)


@pytest.mark.parametrize("system", [SYM11, SYM35])
def test_symmetric_compactified_is_constant(system):
    orb = generate_orbit_compactified(system, 0.05, Direction.FORWARD, Jtilde=0.0, max_iter=20)
    assert len(orb) == 20
    assert np.all(orb.r == 0.05)


def test_symmetric_orbit_is_fixed_point():
    with pytest.raises(NotDivergent) as ei:
        generate_orbit(SYM11, 10.0)
    assert len(ei.value.orbit) == 1


def test_unbalanced_above_refused():
    with pytest.raises(UnbalancedSystem):
        slow_relation(ABOVE_TEMPLATE, 10.0)


def _identity_gap(system, r, rp):
    n = system.n
    rt = default_rtilde(system)
    terms = [I_branch(system, r ** -(n + 1), Side.MINUS).value, I_branch(system, rp ** -(n + 1), Side.PLUS).value,
             J_branch(system, r, Side.MINUS).value, J_branch(system, rp, Side.PLUS).value,
             I_total(system, rt ** -(n + 1)).value]
    lhs = terms[0] - terms[1]
    rhs = terms[2] - terms[3] + terms[4]
    # 10x the quadrature budget max(tol, 64 eps |value|) of every term involved
    bound = 10 * sum(max(TOL, 64 * EPS * abs(t)) for t in terms)
    return abs(lhs - rhs), bound


@pytest.mark.parametrize("system", ASYM_LE_CRITICAL)
def test_invariance_identity(system):
    rng = np.random.default_rng(7)
    rt = default_rtilde(system)
    for _ in range(50):
        r, rp = np.exp(rng.uniform(np.log(1e-3), np.log(rt), 2))
        gap, bound = _identity_gap(system, float(r), float(rp))
        assert gap <= bound, (r, rp, gap, bound)


def test_above_gap_exponent():
    orb = generate_orbit_compactified(ABOVE_JA2, 0.05, Direction.FORWARD, max_iter=4000)
    est = fractal.dimension_gap_law(orb.r)
    # k(m+1)/(2(n+1)) + 1 with k = m - 2 j_a = 1
    assert est.to_dict()["slope"] == pytest.approx(2.5, abs=0.05)


def test_critical_ratio_tends_to_constant():
    orb = generate_orbit(CRIT, 1e3, "auto", max_iter=400, r_floor=1e-100)
    q = orb.r[1:] / orb.r[:-1]
    tail = q[-100:]
    assert 0 < tail.mean() < 1
    assert (tail.max() - tail.min()) / tail.mean() <= 0.01


@settings(max_examples=10, deadline=None)
@given(b2=st.floats(0.2, 2.0), b3=st.floats(-0.4, 0.4), y=st.floats(5.0, 1e4))
def test_round_trip_property(b2, b3, y):
    s = LienardSystem(3, 1, 1.0, (0, 0, b2, b3), (0,))
    if not validate(s).ok or b3 == 0:
        return
    for d, e in ((Direction.FORWARD, Direction.INVERSE), (Direction.INVERSE, Direction.FORWARD)):
        assert slow_relation(s, slow_relation(s, y, d), e) == pytest.approx(y, rel=1e-9)


def test_symmetric_random_systems_have_identity_relation():
    rng = np.random.default_rng(3)
    count = 0
    while count < 5:
        n = int(rng.choice([1, 3]))
        b = [0.0, 0.0] + [0.0] * (n - 1)
        for k in range(2, n + 1, 2):
            b[k] = float(rng.uniform(0.1, 1.0))
        m = int(rng.choice([1, 3, 5]))
        a = [0.0] * m
        for k in range(1, m, 2):
            a[k] = float(rng.uniform(0.1, 1.0))
        s = LienardSystem(n, m, 1.0, tuple(b), tuple(a))
        if s.case.value == "Above" or not validate(s).ok:
            continue
        count += 1
        for y in (3.0, 300.0):
            assert slow_relation(s, y) == pytest.approx(y, abs=1e-8)


def test_asymmetry_below_resolution():
    s = LienardSystem(3, 1, 1.0, (0, 0, 1.0, 1.9e-249), (0,))
    for d in (Direction.FORWARD, Direction.INVERSE):
        assert slow_relation(s, 5.0, d) == pytest.approx(5.0, rel=1e-15)
