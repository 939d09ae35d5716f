"""Slow divergence integrals along the two branches of the critical curve.

With h(x) = F'(x)^2 / G(x):

    I_-(y) = int_0^omega(y) h,   I_+(y) = int_0^alpha(y) h,   I = I_- - I_+.

Each branch is written as int_0^X g_s(t) dt with X = |branch| and
g_s(t) = -t p(st)^2 / q(st), so both sides share one code path and a
symmetric system gives bitwise equal values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ExtrapolationUnstable, QuadratureFailure
from .model import CaseTag, LienardSystem, Side, as_side, branch_inverse, lead_a, lead_b, parity_profile
from .quadrature import IntegralValue, adaptive, geometric_breakpoints

DEFAULT_TOL = 1e-10


def _trim(c):
    c = np.asarray(c, dtype=float)
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        return np.zeros(1)
    return c[: nz[-1] + 1]


class Kernel:
    """x -> -x^power * num(x)^2 / den(x), or x^power * num(x) / den(x) when squared=False."""

    def __init__(self, power, num, den, squared=True, sign=-1.0):
        self.power = int(power)
        self.num = np.asarray(num, dtype=float)
        self.den = np.asarray(den, dtype=float)
        self.squared = squared
        self.sign = sign

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        nv = P.polyval(x, self.num)
        if self.squared:
            nv = nv * nv
        return self.sign * x ** self.power * nv / P.polyval(x, self.den)


@lru_cache(maxsize=256)
def side_kernel(system: LienardSystem, side) -> Kernel:
    _, p, q = system.side_polys(as_side(side))
    return Kernel(1, p, q)


@lru_cache(maxsize=256)
def tail_kernel(system: LienardSystem, side) -> Kernel:
    """g_s(1/u)/u^2 in the variable u = 1/x (needs m >= 2n+2 to be bounded at u = 0)."""
    _, p, q = system.side_polys(as_side(side))
    return Kernel(system.m - 2 * system.n - 2, p[::-1], q[::-1])


@lru_cache(maxsize=256)
def even_part(system: LienardSystem):
    """h(x) + h(-x) = x N(x) / D(x) with N, D built from even/odd parts.

    N = 2 (Se Qo - So Qe) where p^2 = Se + So and q = Qe + Qo, and
    D = Qe^2 - Qo^2 = q(x) q(-x).  Building N this way avoids subtracting
    the large symmetric parts from each other.
    """
    p2 = P.polymul(system.p_coeffs, system.p_coeffs)
    q = system.q_coeffs
    Se, So = _parts(p2)
    Qe, Qo = _parts(q)
    N = 2.0 * P.polysub(P.polymul(Se, Qo), P.polymul(So, Qe))
    D = P.polysub(P.polymul(Qe, Qe), P.polymul(Qo, Qo))
    return _trim(N), _trim(D)


def _parts(c):
    c = np.asarray(c, dtype=float)
    e = c.copy()
    o = c.copy()
    e[1::2] = 0.0
    o[0::2] = 0.0
    return e, o


def even_kernel(system):
    N, D = even_part(system)
    return Kernel(1, N, D, squared=False, sign=1.0)


def even_tail_kernel(system):
    """(h(1/u) + h(-1/u)) / u^2, or None when it is not integrable at u = 0."""
    N, D = even_part(system)
    if not np.any(N):
        return Kernel(0, np.zeros(1), np.ones(1), squared=False, sign=1.0)
    power = (len(D) - 1) - (len(N) - 1) - 3
    if power < 0:
        return None
    return Kernel(power, N[::-1], D[::-1], squared=False, sign=1.0)


def _integrate_0_X(kernel, X, tol):
    if X == 0.0:
        return IntegralValue(0.0, 0.0)
    return adaptive(kernel, geometric_breakpoints(0.0, X), tol=tol)


def I_branch(system: LienardSystem, y: float, side, tol: float = DEFAULT_TOL) -> IntegralValue:
    """I_-(y) (side minus) or I_+(y) (side plus); negative for y > 0."""
    side = as_side(side)
    if y <= 0:
        return IntegralValue(0.0, 0.0)
    X = abs(branch_inverse(system, y, side))
    return _integrate_0_X(side_kernel(system, side), X, tol)


def I_branch_between(system, y1, y2, side, tol=DEFAULT_TOL) -> IntegralValue:
    """I_s(y2) - I_s(y1) computed on the short stretch between the two branch points."""
    side = as_side(side)
    x1 = abs(branch_inverse(system, y1, side))
    x2 = abs(branch_inverse(system, y2, side))
    if x1 == x2:
        return IntegralValue(0.0, 0.0)
    lo, hi = min(x1, x2), max(x1, x2)
    val = adaptive(side_kernel(system, side), _panels(lo, hi), tol=tol)
    return val if x2 > x1 else -val


def _panels(lo, hi, ratio=1.5):
    if lo <= 0:
        return geometric_breakpoints(lo, hi)
    k = max(1, int(np.ceil(np.log(hi / lo) / np.log(ratio))))
    pts = lo * (hi / lo) ** (np.arange(k + 1) / k)
    pts[0], pts[-1] = lo, hi
    return pts


def plus_offset(system: LienardSystem, w: float) -> float:
    """d with |alpha| = w + d, where alpha is the plus-side point at the height F(w).

    Solves F(-(w + d)) = F(w) in Taylor form around w so that d keeps full
    relative precision even when it is far below the spacing of floats near w.
    """
    Fm, _, _ = system.side_polys(Side.PLUS)
    odd = np.array(system.F_coeffs)
    odd[0::2] = 0.0
    rhs = 2.0 * P.polyval(w, odd)  # F(w) - F(-w)
    if rhs == 0.0:
        return 0.0
    derivs = []
    c = Fm
    fact = 1.0
    for i in range(1, len(Fm)):
        c = P.polyder(c)
        fact *= i
        derivs.append(P.polyval(w, c) / fact)
    taylor = np.array([0.0] + derivs)
    dtaylor = P.polyder(taylor)
    d = rhs / derivs[0]
    for _ in range(60):
        step = (P.polyval(d, taylor) - rhs) / P.polyval(d, dtaylor)
        d -= step
        if abs(step) <= 4 * np.finfo(float).eps * abs(d):
            break
    if not np.isfinite(d) or abs(d) > 1e-2 * w:
        return -branch_inverse(system, P.polyval(w, system.F_coeffs), Side.PLUS) - w
    return d


def _stretch(kernel, start, length, tol):
    """int_start^(start+length) kernel, parametrised so the length is exact."""
    if length == 0.0:
        return IntegralValue(0.0, 0.0)
    k = max(1, int(np.ceil(abs(length) / (0.25 * start)))) if start > 0 else 8
    val = adaptive(lambda s: length * kernel(start + length * s), np.linspace(0.0, 1.0, k + 1), tol=tol)
    return val


def I_total(system: LienardSystem, y: float, tol: float = DEFAULT_TOL) -> IntegralValue:
    """I(y) = I_-(y) - I_+(y).

    Evaluated as the integral of h(x) + h(-x) up to min(omega, |alpha|) plus
    the leftover stretch between omega and |alpha|, which keeps the
    asymmetric part free of cancellation.
    """
    if y <= 0:
        return IntegralValue(0.0, 0.0)
    w = branch_inverse(system, y, Side.MINUS)
    d = plus_offset(system, w)
    if d >= 0:
        val = _integrate_0_X(even_kernel(system), w, tol)
        return val - _stretch(side_kernel(system, Side.PLUS), w, d, tol)
    t = w + d
    val = _integrate_0_X(even_kernel(system), t, tol)
    return val + _stretch(side_kernel(system, Side.MINUS), w, d, tol).__neg__()


# -- behaviour at infinity ------------------------------------------------------


def I_branch_infinity(system: LienardSystem, side, tol: float = DEFAULT_TOL) -> IntegralValue:
    """I_s(+inf) for m > 2n+1: [0, 1] in x plus the tail in u = 1/x."""
    if system.case is not CaseTag.ABOVE:
        raise ValueError("I_s(+inf) is finite only when m > 2n+1")
    head = adaptive(side_kernel(system, side), [0.0, 0.5, 1.0], tol=tol)
    tail = adaptive(tail_kernel(system, side), [0.0, 0.5, 1.0], tol=tol)
    return head + tail


def I_star_direct(system: LienardSystem, tol: float = DEFAULT_TOL) -> IntegralValue:
    """lim I(y) as the improper integral of h(x) + h(-x) over [0, inf)."""
    tk = even_tail_kernel(system)
    if tk is None:
        raise QuadratureFailure("h(x) + h(-x) is not integrable at infinity")
    head = adaptive(even_kernel(system), [0.0, 0.5, 1.0], tol=tol)
    tail = adaptive(tk, [0.0, 0.5, 1.0], tol=tol)
    return head + tail


def leading_divergence(system: LienardSystem):
    """+1 / -1 when I(y) -> +inf / -inf, 0 when it converges, None if undecided.

    Read off from the leading asymmetric term (parity profile), not from numerics.
    """
    if system.case is not CaseTag.BELOW:
        return 0
    prof = parity_profile(system)
    n, m = system.n, system.m
    if prof.j_b is None and prof.j_a is None:
        return 0
    if prof.j_b is not None and (prof.j_a is None or n - 2 * prof.j_b < m - 2 * prof.j_a):
        e = m - n - 2 * prof.j_b - 1
        if e > 0:
            return 0
        if e == 0:
            return None
        return -int(np.sign(lead_b(system, prof) * (m - n + 2 * prof.j_b + 1)))
    if prof.j_a is not None and (prof.j_b is None or n - 2 * prof.j_b > m - 2 * prof.j_a):
        e = 2 * m - 2 * n - 2 * prof.j_a - 1
        if e > 0:
            return 0
        if e == 0:
            return None
        return int(np.sign(lead_a(system, prof)))
    e = m - n - 2 * prof.j_b - 1
    if e > 0:
        return 0
    if e == 0 or prof.C == 0:
        return None
    return -int(np.sign(prof.C))


@dataclass(frozen=True)
class InfinityBehavior:
    kind: str  # DivergesMinusInfinity | DivergesPlusInfinity | ConvergesTo | Unresolved
    I_star: IntegralValue | None
    minus_kind: str
    plus_kind: str
    I_minus_inf: IntegralValue | None = None
    I_plus_inf: IntegralValue | None = None
    ladder: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "kind": self.kind,
            "I_star": None if self.I_star is None else self.I_star.to_dict(),
            "minus_kind": self.minus_kind,
            "plus_kind": self.plus_kind,
            "I_minus_inf": None if self.I_minus_inf is None else self.I_minus_inf.to_dict(),
            "I_plus_inf": None if self.I_plus_inf is None else self.I_plus_inf.to_dict(),
            "ladder": self.ladder,
        }


LADDER_RUNGS = 8


def richardson_ladder(system, tol=DEFAULT_TOL, rungs=LADDER_RUNGS, r0=2.0 ** -6):
    """I(y) on the ladder y_k = Y0 * 2^((n+1) k) and the Richardson tableau diagonal.

    I(y) - I_* is a power series in r = y^(-1/(n+1)) without constant term,
    so the exponents 1, 2, ... are eliminated in turn.  Stepping y by
    2^(n+1) halves r at each rung, which keeps the tableau well conditioned.
    """
    n = system.n
    rs = [r0 * 2.0 ** -k for k in range(rungs)]
    ys = [r ** -(n + 1) for r in rs]
    vals = [I_total(system, y, tol=tol * 1e-2).value for y in ys]
    q = 0.5
    table = [list(vals)]
    for j in range(1, rungs):
        prev = table[-1]
        fac = q ** -j - 1.0
        table.append([prev[i + 1] + (prev[i + 1] - prev[i]) / fac for i in range(len(prev) - 1)])
    diag = [row[-1] for row in table]
    return {"y": ys, "r": rs, "I": vals, "extrapolants": diag}


def infinity_behavior(system: LienardSystem, tol: float = DEFAULT_TOL, ladder_tol: float = 1e-8) -> InfinityBehavior:
    """Limits of I_-, I_+ and I as y -> +inf.

    m > 2n+1: both branch integrals converge and are evaluated as improper
    integrals.  Otherwise both branches diverge to -inf; I either diverges
    (sign from the leading asymmetric term) or converges, in which case the
    limit comes from a Richardson ladder cross-checked against the improper
    integral of h(x) + h(-x).
    """
    case = system.case
    if case is CaseTag.ABOVE:
        Im = I_branch_infinity(system, Side.MINUS, tol)
        Ip = I_branch_infinity(system, Side.PLUS, tol)
        Istar = I_star_direct(system, tol)
        return InfinityBehavior(
            kind="ConvergesTo",
            I_star=Istar,
            minus_kind="ConvergesTo",
            plus_kind="ConvergesTo",
            I_minus_inf=Im,
            I_plus_inf=Ip,
            ladder={"difference_of_limits": (Im - Ip).value},
        )
    sgn = leading_divergence(system)
    if sgn is None:
        return InfinityBehavior("Unresolved", None, "DivergesMinusInfinity", "DivergesMinusInfinity")
    if sgn != 0:
        kind = "DivergesPlusInfinity" if sgn > 0 else "DivergesMinusInfinity"
        return InfinityBehavior(kind, None, "DivergesMinusInfinity", "DivergesMinusInfinity")
    if system.symmetric:
        return InfinityBehavior(
            "ConvergesTo", IntegralValue(0.0, 0.0), "DivergesMinusInfinity", "DivergesMinusInfinity",
            ladder={"note": "symmetric: I vanishes identically"},
        )
    lad = richardson_ladder(system, tol)
    diag = lad["extrapolants"]
    jump = abs(diag[-1] - diag[-2])
    direct = I_star_direct(system, tol)
    lad["direct"] = direct.value
    lad["last_jump"] = jump
    lad["target"] = ladder_tol
    if jump > 10 * ladder_tol:
        raise ExtrapolationUnstable(
            f"ladder extrapolants still moving by {jump:.3e}", diagnostics=lad
        )
    if abs(diag[-1] - direct.value) > 10 * ladder_tol:
        raise ExtrapolationUnstable(
            f"extrapolated {diag[-1]!r} disagrees with improper integral {direct.value!r}",
            diagnostics=lad,
        )
    err = max(jump, abs(diag[-1] - direct.value), direct.abs_error_estimate)
    return InfinityBehavior(
        "ConvergesTo", IntegralValue(diag[-1], err), "DivergesMinusInfinity", "DivergesMinusInfinity",
        ladder=lad,
    )
