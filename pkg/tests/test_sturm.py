from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from lienard_infinity.sturm import count_real_roots, positive_everywhere, sturm_chain


def test_known_root_counts():
    assert count_real_roots([-1, 0, 1]) == 2  # x^2 - 1
    assert count_real_roots([1, 0, 1]) == 0  # x^2 + 1
    assert count_real_roots([0, 0, 0, 1]) == 1  # x^3, one distinct root
    assert count_real_roots([-6, 11, -6, 1]) == 3  # (x-1)(x-2)(x-3)
    assert count_real_roots([5]) == 0


def test_tangential_double_root_is_seen():
    # (x - 1/3)^2 (x^2 + 1): sampling misses it, the chain does not
    coeffs = [Fraction(1, 9), Fraction(-2, 3), Fraction(10, 9), Fraction(-2, 3), Fraction(1)]
    assert count_real_roots(coeffs) == 1
    assert not positive_everywhere(coeffs)


def test_positive_everywhere():
    assert positive_everywhere([1, 0, 1])
    assert not positive_everywhere([-1, 0, 1])
    assert not positive_everywhere([-1, 0, -1])
    assert positive_everywhere([2])


def test_zero_polynomial_rejected():
    import pytest

    with pytest.raises(ValueError):
        sturm_chain([0, 0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=1, max_size=5).filter(lambda r: len(set(r)) == len(r)))
def test_count_matches_constructed_integer_roots(roots):
    coeffs = np.polynomial.polynomial.polyfromroots(roots)
    c = [int(round(v)) for v in coeffs]
    assert count_real_roots(c) == len(roots)
    # multiplying by x^2 + 1 adds no real roots
    c2 = np.polynomial.polynomial.polymul(c, [1, 0, 1])
    assert count_real_roots([int(round(v)) for v in c2]) == len(roots)
