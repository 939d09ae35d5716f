import math

import numpy as np
import pytest

from lienard_infinity.charts import (
    J_branch,
    Jhat_branch,
    branch_curve,
    canard_at_infinity_feasible,
    chart,
    chart_vector_field,
    default_rtilde,
    jacobian,
    phi,
    psi,
    rtilde_max,
    singularity_catalog,
    slow_dynamics_at_infinity,
)
from lienard_infinity.errors import ChartMismatch, NewtonDivergence
from lienard_infinity.integrals import I_branch, I_branch_infinity
from lienard_infinity.model import LienardSystem, Side

import oracles
from systems import ABOVE_JA2, CRIT, SYM11, SYM15, SYM35, T11A, T12A, T13A

# one representative per case/parity cell, n odd and even
CELLS = {
    "below_11": LienardSystem(1, 1, 1.0, (0, 0), (0,)),
    "below_31": T11A,
    "below_n2": LienardSystem(2, 3, 1.0, (0, 0, 0.5), (0, 1, 0)),
    "critical_A1": CRIT,
    "critical_A05": LienardSystem(1, 3, 0.5, (0, 0), (0, 1, 0.05)),
    "critical_Aneg": LienardSystem(1, 3, -1.0, (0, 0), (0, 1, 0)),
    "above_odd_A1": LienardSystem(1, 5, 1.0, (0, 0), (0, 1, 0, 0, 0.2)),
    "above_odd_Aneg": LienardSystem(1, 5, -1.0, (0, 0), (0, 1, 0, 0, 0)),
    "above_even": LienardSystem(1, 6, 1.0, (0, 0), (0, 1, 0, 0, 0, 0)),
    "above_n2": LienardSystem(2, 7, 1.0, (0, 0, 0.5), (0, 1, 0, 0, 0, 0, 0)),
}


def _find(cat, chart_id, **loc):
    for e in cat:
        d = dict(e.location)
        if e.chart == chart_id and all(abs(d[k] - v) < 1e-12 for k, v in loc.items()):
            return e
    raise KeyError((chart_id, loc))


@pytest.mark.parametrize("name", sorted(CELLS))
def test_catalog_matches_symbolic_tuples(name):
    cat = singularity_catalog(CELLS[name])
    assert cat
    for e in cat:
        assert np.allclose(e.eigenvalues, e.symbolic, rtol=0, atol=1e-8), e


def test_catalog_below_entries():
    cat = singularity_catalog(CELLS["below_11"])
    node = _find(cat, "PosX", r=0.0, ybar=0.0)
    assert node.eigenvalues == pytest.approx((1.0, 2.0), abs=1e-8)
    assert node.kind == "HyperbolicNode(repelling)"
    semi = _find(cat, "PosX", r=0.0, ybar=1.0)
    assert semi.eigenvalues == pytest.approx((0.0, -2.0), abs=1e-8)
    assert semi.kind == "SemiHyperbolic"
    assert "away" in semi.note


def test_catalog_above_tuples():
    cat = singularity_catalog(CELLS["above_odd_A1"])
    assert _find(cat, "phase_y+:PosX", rt=0.0).eigenvalues == pytest.approx((2.0, -3.0, 6.0), abs=1e-8)
    cat = singularity_catalog(CELLS["above_even"])
    assert _find(cat, "phase_r:PosX", yt=0.0).eigenvalues == pytest.approx((2.0, 0.5, -3.0), abs=1e-8)
    cat = singularity_catalog(CELLS["above_odd_Aneg"])
    y = math.sqrt(2 / 6)
    node = _find(cat, "family:PosX", rt=0.0, yt=y)
    assert node.eigenvalues == pytest.approx((-math.sqrt(1 / 3), -math.sqrt(12)), abs=1e-8)
    assert node.kind == "HyperbolicNode(attracting)"


def test_field_vanishes_at_origin_of_posx():
    s = CELLS["below_11"]
    ch = chart(s, "PosX")
    assert np.allclose(chart_vector_field(s, ch, 0.0, [0.0, 0.0]), 0.0)
    ev = np.sort(np.linalg.eigvals(jacobian(s, ch, 0.0, [0.0, 0.0])).real)
    assert ev == pytest.approx([1.0, 2.0], abs=1e-8)


def test_chart_mismatch():
    ch = chart(T11A, "PosX")
    with pytest.raises(ChartMismatch):
        chart_vector_field(ABOVE_JA2, ch, 0.0, [0.0, 0.0])
    with pytest.raises(ChartMismatch):
        chart_vector_field(T11A, chart(T11A, "PosX", "family"), 0.0, [0.0, 0.5])


@pytest.mark.parametrize("system, expected", [
    (CELLS["below_11"], True),
    (CELLS["below_n2"], False),
    (CELLS["above_even"], False),
    (CRIT, True),
    (CELLS["critical_Aneg"], False),
    (ABOVE_JA2, True),
    (CELLS["above_odd_Aneg"], False),
])
def test_feasibility(system, expected):
    ok, reason = canard_at_infinity_feasible(system)
    assert ok is expected and reason


@pytest.mark.parametrize("system, way", [
    (CELLS["below_11"], "away"),
    (CELLS["critical_Aneg"], "towards"),
    (CELLS["above_odd_Aneg"], "towards"),
    (CELLS["above_odd_A1"], "away"),
])
def test_slow_dynamics_direction(system, way):
    sd = slow_dynamics_at_infinity(system, chart(system, "PosX"), 1e-3)
    assert sd["direction"] == way
    assert np.sign(sd["leading_coefficient"]) == sd["sign"]


def test_phi_trivial_and_endpoints():
    rs = np.linspace(0, 0.5, 9)
    assert np.all(phi(SYM11, rs, Side.MINUS) == 1.0)
    assert np.all(phi(SYM11, rs, Side.PLUS) == -1.0)
    assert phi(T11A, 0.0, Side.MINUS) == 1.0
    assert phi(T11A, 0.0, Side.PLUS) == -1.0


def test_phi_residual_on_grid():
    n, b = T11A.n, T11A.b
    rs = np.linspace(0, rtilde_max(T11A), 200)
    for side in (Side.MINUS, Side.PLUS):
        x = phi(T11A, rs, side)
        res = 1 - x ** (n + 1) - sum(b[k] * rs ** (n + 1 - k) * x ** k for k in range(n + 1))
        assert np.max(np.abs(res)) <= 1e-12
    with pytest.raises(NewtonDivergence):
        phi(T11A, 2 * rtilde_max(T11A), Side.MINUS)


def test_phi_is_scaled_branch_inverse():
    for r in (0.3, 0.05, 1e-3):
        for side in ("minus", "plus"):
            ref = r * oracles.branch(T11A, r ** -4, side)
            assert phi(T11A, r, side) == pytest.approx(ref, abs=1e-12)


def _phi_sum_ratio(s, r):
    n = s.n
    lead = -(2 / (n + 1)) * sum(s.b[2 * j + 1] * r ** (n - 2 * j) for j in range((n + 1) // 2))
    return (phi(s, r, Side.MINUS) + phi(s, r, Side.PLUS)) / lead


def _psi_gap_ratio(s, hr):
    n, m = s.n, s.m
    lead = (2 / (n + 1)) * sum(s.b[2 * j + 1] * hr ** ((n + 1 - 2 * j) * (m + 1) / (2 * (n + 1)))
                               for j in range((n + 1) // 2))
    return (psi(s, hr, Side.MINUS) - psi(s, hr, Side.PLUS)) / lead


PHI_SYSTEMS = [T11A, LienardSystem(5, 1, 1.0, (0, 0, 1, 0, 0, 0.3), (0,)), T13A]
PSI_SYSTEMS = [LienardSystem(3, 9, 1.0, (0, 0, 1, -0.5), (0, 1) + (0,) * 7),
                  LienardSystem(3, 11, 1.0, (0, 0, 1, 0.4), (0, 1) + (0,) * 9)]


@pytest.mark.parametrize("system", PHI_SYSTEMS)
def test_phi_sum_leading_term(system):
    assert abs(_phi_sum_ratio(system, 1e-3) - 1) <= 0.05


@pytest.mark.parametrize("system", PSI_SYSTEMS)
def test_psi_gap_leading_term(system):
    assert abs(_psi_gap_ratio(system, 1e-3) - 1) <= 0.05


def test_psi_trivial_and_picard_oracle():
    hr = np.geomspace(1e-6, 1e-1, 7)
    assert np.allclose(psi(SYM15, hr, Side.MINUS), hr ** 1.5, rtol=1e-14, atol=0)
    assert psi(SYM15, 0.0, Side.PLUS) == 0.0
    s = LienardSystem(1, 5, 1.0, (0.1, 0), (0, 1, 0, 0, 0))
    for side in ("minus", "plus"):
        assert psi(s, 1e-3, side) == pytest.approx(oracles.picard_psi(s, 1e-3, side), abs=1e-12)
    with pytest.raises(ChartMismatch):
        psi(T11A, 1e-3, Side.MINUS)


def test_psi_leading_order():
    s = PSI_SYSTEMS[0]
    e = (s.m + 1) / (2 * (s.n + 1))
    for side in (Side.MINUS, Side.PLUS):
        ratios = [psi(s, t, side) / t ** e for t in (1e-2, 1e-4, 1e-6)]
        assert abs(ratios[-1] - 1) < abs(ratios[0] - 1) or ratios[0] == 1
        assert ratios[-1] == pytest.approx(1, abs=1e-4)


def test_branch_curve_dispatch():
    assert branch_curve(T11A, "minus")(0.0) == 1.0
    assert branch_curve(SYM15, "plus")(0.0) == 0.0


def test_J_symmetric_branches_equal():
    for s in (SYM11, SYM35):
        for r in (1e-4, 1e-2, 0.1):
            assert J_branch(s, r, Side.MINUS).value == pytest.approx(J_branch(s, r, Side.PLUS).value, rel=1e-12)


def test_J_endpoint_and_sign():
    rt = default_rtilde(T11A)
    assert J_branch(T11A, rt, Side.MINUS).value == 0.0
    for r in (1e-3, 0.05, 0.2):
        assert J_branch(T11A, r, Side.PLUS).value < 0
    with pytest.raises(ChartMismatch):
        J_branch(ABOVE_JA2, 0.1, Side.MINUS)


@pytest.mark.parametrize("side", ["minus", "plus"])
def test_J_change_of_variables_oracle(side):
    n = T11A.n
    x_hi = oracles.branch(T11A, 0.05 ** -(n + 1), side)
    x_lo = oracles.branch(T11A, 0.2 ** -(n + 1), side)
    ref = oracles.simpson(lambda x: oracles.h(T11A, x), x_lo, x_hi, 10 ** 6)
    # |J| ~ 1.7e8 here, so 1e-8 is below one ulp; compare relative to the magnitude
    assert J_branch(T11A, 0.05, side, rtilde=0.2).value == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("system", [T11A, T12A, CRIT])
def test_J_is_difference_of_finite_integrals(system):
    n = system.n
    rt = default_rtilde(system)
    for r in (1e-3, 3e-2):
        for side in (Side.MINUS, Side.PLUS):
            ref = I_branch(system, r ** -(n + 1), side).value - I_branch(system, rt ** -(n + 1), side).value
            assert J_branch(system, r, side).value == pytest.approx(ref, abs=1e-8, rel=1e-10)


def test_Jhat_tail_identity():
    s = ABOVE_JA2
    hr = 1e-2
    y = hr ** (-(s.m + 1) / 2)
    for side in ("minus", "plus"):
        ref = I_branch_infinity(s, side).value - oracles.I_branch(s, y, side, 10 ** 6)
        assert Jhat_branch(s, hr, side).value == pytest.approx(ref, abs=1e-8)
    assert Jhat_branch(s, 0.0, Side.MINUS).value == 0.0


def test_Jhat_symmetric_and_monotone():
    hrs = np.geomspace(1e-4, 0.3, 25)
    vm = np.array([Jhat_branch(SYM15, t, Side.MINUS).value for t in hrs])
    vp = np.array([Jhat_branch(SYM15, t, Side.PLUS).value for t in hrs])
    assert vm == pytest.approx(vp, rel=1e-12)
    for side in (Side.MINUS, Side.PLUS):
        v = np.array([Jhat_branch(ABOVE_JA2, t, side).value for t in hrs])
        assert np.all(v < 0) and np.all(np.diff(v) < 0)
