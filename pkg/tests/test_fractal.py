import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lienard_infinity.errors import NotAsymptotic, WindowTooNarrow
from lienard_infinity.fractal import (
    NONDEGENERACY_THRESHOLD,
    dimension_gap_law,
    dimension_neighborhood,
    neighborhood_length,
    neighborhood_table,
    nondegeneracy_diagnostic,
    power_recursion,
    union_length_bruteforce,
)

import oracles


def recursion(beta, c, count, r0=0.5):
    out = [r0]
    for _ in range(count - 1):
        r = out[-1]
        out.append(r - c * r ** beta)
    return np.array(out)


def test_neighborhood_examples():
    assert neighborhood_length([1.0], 0.1) == pytest.approx(0.2)
    assert neighborhood_length([1.0, 0.5, 0.0], 0.3) == pytest.approx(1.6)


def test_dyadic_points_match_sweep_exactly():
    pts = [2.0 ** -l for l in range(21)] + [0.0]
    assert neighborhood_length(pts, 1e-4) == oracles.union_length_exact(pts, 1e-4)
    # the sweep accumulates in float and may differ in the last bit
    assert union_length_bruteforce(pts, 1e-4) == pytest.approx(oracles.union_length(pts, 1e-4), rel=4e-16)


point_sets = st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=40, unique=True)


@settings(max_examples=200, deadline=None)
@given(pts=point_sets, d=st.floats(1e-4, 5.0))
def test_union_matches_sweep(pts, d):
    assert neighborhood_length(pts, d) == pytest.approx(oracles.union_length(pts, d), rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(pts=point_sets, d1=st.floats(1e-4, 5.0), d2=st.floats(1e-4, 5.0))
def test_monotone_in_delta(pts, d1, d2):
    lo, hi = sorted((d1, d2))
    assert neighborhood_length(pts, lo) <= neighborhood_length(pts, hi) + 1e-12


@settings(max_examples=100, deadline=None)
@given(p=point_sets, q=point_sets, d=st.floats(1e-4, 5.0))
def test_subadditive(p, q, d):
    union = sorted(set(p) | set(q))
    assert neighborhood_length(union, d) <= neighborhood_length(p, d) + neighborhood_length(q, d) + 1e-9


@pytest.mark.parametrize("beta", [1.5, 2.0, 3.0, 4.0])
@pytest.mark.parametrize("c", [1.0, 0.1])
def test_calibration(beta, c):
    t0 = time.perf_counter()
    r = recursion(beta, c, 10 ** 5)
    target = 1 - 1 / beta
    nb = dimension_neighborhood(r)
    gl = dimension_gap_law(r)
    assert abs(nb.value - target) <= 0.02
    assert abs(gl.value - target) <= 0.02
    assert abs(nb.value - gl.value) <= 2 * (nb.stderr + gl.stderr) + 0.02
    assert time.perf_counter() - t0 <= 10.0


def test_power_recursion_matches_loop():
    assert np.array_equal(power_recursion(0.5, 0.1, 3.0, 500), recursion(3.0, 0.1, 500))


def test_spec_synthetic_examples():
    assert dimension_neighborhood(recursion(2.0, 1.0, 10 ** 4)).value == pytest.approx(0.5, abs=0.02)
    assert dimension_neighborhood(recursion(3.0, 1.0, 10 ** 4)).value == pytest.approx(2 / 3, abs=0.02)


def test_geometric_sequences():
    r = 2.0 ** -np.arange(1000)
    assert dimension_neighborhood(r).value == pytest.approx(0.0, abs=0.02)
    g = 0.9 ** np.arange(2000)
    est = dimension_gap_law(g)
    assert est.value == 0.0
    assert est.slope == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("lam", [1e-3, 0.37, 4.0])
def test_scale_invariance(lam):
    r = recursion(2.0, 0.1, 2 * 10 ** 4)
    for fn in (dimension_neighborhood, dimension_gap_law):
        a, b = fn(r), fn(lam * r)
        assert abs(a.value - b.value) <= max(a.stderr + b.stderr, 1e-3)


def test_nondegeneracy_bounded_for_power_law():
    nd = nondegeneracy_diagnostic(recursion(2.0, 1.0, 10 ** 5), 0.5)
    assert nd["content_lower"] <= nd["content_upper"]
    assert nd["ratio"] <= 10
    assert nd["verdict"] == "nondegenerate (empirical)"


def test_nondegeneracy_detects_wrong_exponent():
    nd = nondegeneracy_diagnostic(recursion(2.0, 1.0, 10 ** 5), 0.9)
    assert nd["trend"] > 0.3  # content_upper at small delta tends to 0


def test_nondegeneracy_geometric_at_half_grows():
    g = 0.97 ** np.arange(20000)
    ratios = [nondegeneracy_diagnostic(g, 0.5, dd)["ratio"] for dd in (1.0, 2.0, 3.0)]
    assert ratios[0] < ratios[1] < ratios[2]
    assert ratios[2] > 10


def test_threshold_value():
    assert NONDEGENERACY_THRESHOLD == 100.0


def test_errors():
    with pytest.raises(WindowTooNarrow):
        dimension_neighborhood(recursion(2.0, 1.0, 12))
    noisy = recursion(2.0, 1.0, 2000) * (1 + 0.3 * np.sin(np.arange(2000)) ** 2 / np.arange(1, 2001) ** 0)
    noisy = np.sort(noisy)[::-1]
    noisy = noisy[np.concatenate([[True], np.diff(noisy) < 0])]
    with pytest.raises(NotAsymptotic):
        dimension_gap_law(noisy)
    with pytest.raises(ValueError):
        dimension_gap_law([0.1, 0.2, 0.05])


def test_table_rows():
    rows = neighborhood_table([1.0, 0.5], [0.1, 0.3])
    assert rows[0][0] == 0.1 and rows[1][0] == 0.3
