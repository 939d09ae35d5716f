"""Exact real-root counting with Sturm sequences.

Coefficients are converted to Fractions, so every float is taken at its
exact binary value and the count is free of rounding.
"""

from fractions import Fraction


def _trim(p):
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return p


def _deriv(p):
    return [k * p[k] for k in range(1, len(p))]


def _rem(num, den):
    num = list(num)
    d = len(den) - 1
    lead = den[-1]
    while len(num) - 1 >= d and num:
        if num[-1] == 0:
            num.pop()
            continue
        q = num[-1] / lead
        shift = len(num) - 1 - d
        for i, c in enumerate(den):
            num[shift + i] -= q * c
        num.pop()
    return _trim(num)


def sturm_chain(coeffs):
    """Sturm chain of the polynomial with ascending ``coeffs``."""
    p0 = _trim(Fraction(c) for c in coeffs)
    if not p0:
        raise ValueError("zero polynomial")
    chain = [p0]
    p1 = _trim(_deriv(p0))
    if not p1:
        return chain
    chain.append(p1)
    while True:
        r = _rem(chain[-2], chain[-1])
        if not r:
            return chain
        chain.append([-c for c in r])


def _sign_changes(signs):
    s = [x for x in signs if x != 0]
    return sum(1 for a, b in zip(s, s[1:]) if a != b)


def _sign_at_inf(p, neg):
    lead = p[-1]
    deg = len(p) - 1
    s = 1 if lead > 0 else -1
    if neg and deg % 2:
        s = -s
    return s


def count_real_roots(coeffs):
    """Number of distinct real roots."""
    chain = sturm_chain(coeffs)
    lo = _sign_changes([_sign_at_inf(p, True) for p in chain])
    hi = _sign_changes([_sign_at_inf(p, False) for p in chain])
    return lo - hi


def positive_everywhere(coeffs):
    """True iff the polynomial is > 0 on the whole real line."""
    p = _trim(Fraction(c) for c in coeffs)
    if not p:
        return False
    if count_real_roots(p) > 0:
        return False
    return p[0] > 0
