"""The slow relation function S, its inverse, and orbits escaping to infinity.

Finite plane: S(y) solves I_+(S(y)) = I_-(y).  Both sides are rewritten as
I_+(s) - I_+(y) = I(y) so that only a short stretch of the branch is
integrated next to the cancellation-free total integral.

Compactified: for m <= 2n+1 the orbit lives in r = y^(-1/(n+1)) and obeys
J_-(r_l) - J_+(r_{l+1}) = Jtilde; above the critical degree it lives in
hr = y^(-2/(m+1)) and uses the tail integrals Jhat.  Only the running
difference K = J_- - J_+ is carried from step to step, never J itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import charts
from .errors import LienardError, NotDivergent, TargetOutOfRange, UnbalancedSystem
from .integrals import (
    DEFAULT_TOL,
    I_branch_between,
    I_total,
    infinity_behavior,
    tail_kernel,
)
from .model import CaseTag, Direction, LienardSystem, Side, branch_inverse
from .quadrature import adaptive, gauss_legendre, gauss_legendre_geometric

BALANCE_RTOL = 1e-6
DEFAULT_Y0 = 1e3
MAX_Y0 = 1e9
DEFAULT_MAX_ITER = 10_000
DEFAULT_R_FLOOR = 1e-8
FINITE_TERMS = 20
_EPS = np.finfo(float).eps
_ROUND = 64 * _EPS


def as_direction(d) -> Direction:
    if isinstance(d, Direction):
        return d
    key = str(d)
    alias = {"S": Direction.FORWARD, "Sinv": Direction.INVERSE, "forward": Direction.FORWARD, "inverse": Direction.INVERSE}
    if key in alias:
        return alias[key]
    return Direction(key)


def y_exponent(system: LienardSystem) -> float:
    """r = y^(-exponent): 1/(n+1) below and at the critical degree, 2/(m+1) above."""
    if system.case is CaseTag.ABOVE:
        return 2.0 / (system.m + 1)
    return 1.0 / (system.n + 1)


# -- balance ---------------------------------------------------------------------


@lru_cache(maxsize=128)
def balance_status(system: LienardSystem, tol: float = DEFAULT_TOL) -> dict:
    """|I_*| against 1e-6 * max(|I_-(+inf)|, 1) for m > 2n+1."""
    if system.case is not CaseTag.ABOVE:
        raise ValueError("balance at infinity concerns m > 2n+1")
    ib = infinity_behavior(system, tol)
    scale = max(abs(ib.I_minus_inf.value), 1.0)
    I_star = ib.I_star.value
    return {
        "I_star": I_star,
        "I_star_error": ib.I_star.abs_error_estimate,
        "I_minus_inf": ib.I_minus_inf.value,
        "I_plus_inf": ib.I_plus_inf.value,
        "threshold": BALANCE_RTOL * scale,
        "balanced": abs(I_star) <= BALANCE_RTOL * scale,
    }


def _require_balance(system, tol):
    st = balance_status(system, tol)
    if not st["balanced"]:
        raise UnbalancedSystem(
            f"|I_*| = {abs(st['I_star']):.3e} exceeds the balance threshold {st['threshold']:.3e}"
        )
    return st


# -- a safeguarded monotone solver -------------------------------------------------


def _solve_increasing(G, dG, lo, hi, x0, xtol_rel=1e-13, maxit=100):
    """Root of an increasing G on [lo, hi] with G(lo) < 0 < G(hi).

    Newton from x0, falling back to bisection when a step leaves the bracket.
    """
    x = x0 if lo <= x0 <= hi else 0.5 * (lo + hi)
    for _ in range(maxit):
        g = G(x)
        if g == 0.0:
            return x, 0.0
        if g < 0:
            lo = x
        else:
            hi = x
        d = dG(x)
        if d > 0 and math.isfinite(d):
            x_new = x - g / d
            if abs(x_new - x) <= xtol_rel * abs(x):
                return x_new, abs(g)
        else:
            x_new = None
        if x_new is None or not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
            if hi - lo <= xtol_rel * abs(x_new):
                return x_new, abs(G(x_new))
        x = x_new
    return x, abs(G(x))


# -- finite plane ----------------------------------------------------------------


def _side_slope(system, y, side):
    """dI_s/dy = F'(x)/G(x) at x = branch_s(y)."""
    x = branch_inverse(system, y, side)
    return float(system.dF(x) / system.G(x))


def slow_relation(system: LienardSystem, y: float, direction=Direction.FORWARD, tol: float = DEFAULT_TOL, _report=None) -> float:
    """S(y) (ForwardS) or S^-1(y) (InverseS).

    ForwardS solves I_+(s) = I_-(y); InverseS solves I_-(s) = I_+(y).
    """
    d = as_direction(direction)
    y = float(y)
    if not (y > 0 and math.isfinite(y)):
        raise ValueError("y must be a positive finite number")
    if d is Direction.FIXED:
        if _report is not None:
            _report["residual"] = 0.0
        return y
    if system.case is CaseTag.ABOVE:
        st = _require_balance(system, tol)
    Iy = I_total(system, y, tol).value
    side = Side.PLUS if d is Direction.FORWARD else Side.MINUS
    T = Iy if d is Direction.FORWARD else -Iy
    if T == 0.0:
        if _report is not None:
            _report["residual"] = 0.0
        return y

    # g(s) = I_s(s) - I_s(y) - T is decreasing in s; work with G = -g (increasing)
    def G(s):
        return T - I_branch_between(system, y, s, side, tol).value

    def dG(s):
        return -_side_slope(system, s, side)

    if system.case is CaseTag.ABOVE:
        lim = (st["I_plus_inf"] if side is Side.PLUS else st["I_minus_inf"])
        from .integrals import I_branch

        room = lim - I_branch(system, y, side, tol).value  # sup over s > y of I_s(s) - I_s(y)
        if T < 0 and T <= room:
            raise TargetOutOfRange(
                f"target {T!r} lies beyond the range of the branch integral ({room!r})", residual=room - T
            )

    slope = dG(y)
    step = abs(T / slope) if slope > 0 else y
    step = max(step, 4 * _EPS * y)  # a step below the resolution of y would never move the bracket
    if T < 0:  # root above y
        lo, hi = y, y + step
        k = 0
        while G(hi) < 0:
            lo = hi
            step *= 2.0
            hi = y + step
            k += 1
            if k > 200 or not math.isfinite(hi):
                raise TargetOutOfRange("could not bracket the relation root from above", residual=G(hi))
        x0 = y + abs(T / slope)
    else:  # root below y
        hi = y
        lo = max(y - step, 0.5 * y)
        k = 0
        while G(lo) > 0:
            hi = lo
            lo *= 0.5
            k += 1
            if k > 1100 or lo == 0.0:
                raise TargetOutOfRange("could not bracket the relation root from below", residual=G(lo))
        x0 = y - abs(T / slope)
    s, res = _solve_increasing(G, dG, lo, hi, x0)
    if _report is not None:
        _report["residual"] = res / max(1.0, abs(T))
    return s


# -- orbit container --------------------------------------------------------------


@dataclass
class Orbit:
    direction: Direction
    variable: str  # "r" or "hr"
    exponent: float
    r: np.ndarray
    y: np.ndarray
    residual: np.ndarray
    termination: str = "MaxIterations"
    r_min: float | None = None
    finite_terms: int = 0
    config: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.r.size)

    @property
    def gaps(self):
        return self.r[:-1] - self.r[1:]

    def to_dict(self):
        return {
            "direction": self.direction.value,
            "variable": self.variable,
            "exponent": self.exponent,
            "length": len(self),
            "termination": self.termination,
            "r_min": self.r_min,
            "finite_terms": self.finite_terms,
            "first": float(self.r[0]) if len(self) else None,
            "last": float(self.r[-1]) if len(self) else None,
            "max_residual": float(np.max(self.residual)) if len(self) else 0.0,
            "config": self.config,
        }

    def to_csv(self) -> str:
        """Columns l, y_l, r_l (or hr_l), gap, residual; the residual is relative to max(1, |target|)."""
        lines = [f"l,y_l,{self.variable}_l,gap,residual"]
        g = self.gaps
        for i in range(len(self)):
            yv = self.y[i]
            ys = _fmt(yv) if math.isfinite(yv) else ""
            gs = _fmt(g[i]) if i < g.size else ""
            lines.append(f"{i},{ys},{_fmt(self.r[i])},{gs},{_fmt(self.residual[i])}")
        return "\n".join(lines) + "\n"


def _fmt(x):
    return format(float(x), ".17g")


# -- compactified engines ------------------------------------------------------------


class _BelowEngine:
    """r-recursion for m <= 2n+1 with the running difference K = J_- - J_+."""

    def __init__(self, system, r0, direction, Jt=None, rtilde=None, tol=DEFAULT_TOL):
        self.system = system
        self.rt = charts.default_rtilde(system) if rtilde is None else float(rtilde)
        if not 0 < r0 < self.rt:
            raise ValueError(f"need 0 < r0 < rtilde = {self.rt}")
        self.Jt = charts.Jtilde(system, self.rt, tol) if Jt is None else float(Jt)
        self.jm = charts.j_kernel(system, Side.MINUS)
        self.jp = charts.j_kernel(system, Side.PLUS)
        self.direction = direction
        self.r = float(r0)
        diff = lambda s: self.jm(s) - self.jp(s)  # noqa: E731
        k0 = adaptive(diff, charts._geo(self.r, self.rt), tol=tol * 1e-2)
        self.K = k0.value
        # error carried by the target K - Jtilde; smaller targets are not resolved
        self.err = k0.abs_error_estimate + (tol if Jt is None else 0.0) + _ROUND * (abs(self.K) + abs(self.Jt))

    def _int(self, f, a, b):
        return gauss_legendre_geometric(f, a, b, npts=20)

    def step(self):
        r = self.r
        if self.direction is Direction.FORWARD:
            j, other, T = self.jp, self.jm, self.K - self.Jt
        else:
            j, other, T = self.jm, self.jp, self.Jt - self.K
        jr = float(j(np.array([r]))[0])
        # a target below the carried error, or below what one ulp of r moves, is not resolved
        if abs(T) <= self.err + 4 * _EPS * r * abs(jr):
            return r, abs(T)
        if T > 0:
            raise NotDivergent("the recursion moves away from r = 0")

        def G(x):  # increasing in x, G(r) = -T > 0
            return self._int(j, x, r) - T

        def dG(x):
            return -float(j(np.array([x]))[0])

        x0 = r - T / jr
        lo = x0 if 0 < x0 < r else 0.5 * r
        k = 0
        while G(lo) > 0:
            lo *= 0.5
            k += 1
            if k > 60:
                raise TargetOutOfRange("no bracket for the compactified step", residual=G(lo))
        x, res = _solve_increasing(G, dG, lo, r, x0 if 0 < x0 < r else 0.5 * (lo + r), xtol_rel=1e-13)
        res /= max(1.0, abs(T))
        # K(x) = K(r) + int_x^r (j_- - j_+); the j-part over [x, r] is T + residual
        io, ij = self._int(other, x, r), self._int(j, x, r)
        self.K += (io - ij) if self.direction is Direction.FORWARD else (ij - io)
        self.err += _ROUND * (abs(io) + abs(ij))
        self.r = x
        return x, res


class _AboveEngine:
    """hr-recursion for m > 2n+1 in the tail variables rho_s = psi_s(hr)."""

    def __init__(self, system, hr0, direction, Jt=0.0, tol=DEFAULT_TOL):
        self.system = system
        self.direction = direction
        self.Jt = float(Jt)
        self.tm = tail_kernel(system, Side.MINUS)
        self.tp = tail_kernel(system, Side.PLUS)
        self.hr = float(hr0)
        if not self.hr > 0:
            raise ValueError("hr0 must be positive")
        self.rho = {Side.MINUS: charts.psi(system, self.hr, Side.MINUS), Side.PLUS: charts.psi(system, self.hr, Side.PLUS)}

    def _Jbar(self, t, a, b):
        if a == b:
            return 0.0
        return float(gauss_legendre(t, a, b, npts=30, panels=2))

    def Khat(self):
        """(Khat, rounding bound of its evaluation)."""
        rm, rp = self.rho[Side.MINUS], self.rho[Side.PLUS]
        lo = min(rm, rp)
        base = self._Jbar(lambda u: self.tm(u) - self.tp(u), 0.0, lo)
        if rm > rp:
            piece = self._Jbar(self.tm, rp, rm)
        else:
            piece = -self._Jbar(self.tp, rm, rp)
        scale = abs(self._Jbar(self.tm, 0.0, lo)) + abs(piece)
        return base + piece, _ROUND * scale

    def step(self):
        sys_ = self.system
        K, err = self.Khat()
        if self.direction is Direction.FORWARD:
            side, t, T = Side.PLUS, self.tp, self.Jt - K
        else:
            side, t, T = Side.MINUS, self.tm, K - self.Jt
        rho = self.rho[side]
        tr = float(t(np.array([rho]))[0])
        if abs(T) <= err + _ROUND * abs(self.Jt) + 4 * _EPS * rho * abs(tr):
            return self.hr, abs(T)
        if T > 0:
            raise NotDivergent("the recursion moves away from hr = 0")
        full = self._Jbar(t, 0.0, rho)
        if T < full:
            raise TargetOutOfRange("step target exceeds the whole tail integral", residual=full - T)

        def G(x):
            return self._Jbar(t, x, rho) - T

        def dG(x):
            return -float(t(np.array([x]))[0])

        x0 = rho - T / tr
        lo = x0 if 0 < x0 < rho else 0.5 * rho
        while G(lo) > 0:
            lo *= 0.5
        x, res = _solve_increasing(G, dG, lo, rho, x0 if 0 < x0 < rho else 0.5 * (lo + rho), xtol_rel=1e-13)
        res /= max(1.0, abs(T))
        hr = float(charts.hr_from_rho(sys_, x, side))
        other = Side.MINUS if side is Side.PLUS else Side.PLUS
        self.rho = {side: x, other: charts.psi(sys_, hr, other)}
        self.hr = hr
        return hr, res


def _engine(system, start, direction, Jt, tol, rtilde=None):
    if system.case is CaseTag.ABOVE:
        return _AboveEngine(system, start, direction, 0.0 if Jt is None else Jt, tol)
    return _BelowEngine(system, start, direction, Jt, rtilde, tol)


def generate_orbit_compactified(
    system: LienardSystem,
    start: float,
    direction=Direction.FORWARD,
    Jtilde: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    r_floor: float = DEFAULT_R_FLOOR,
    tol: float = DEFAULT_TOL,
    rtilde: float | None = None,
) -> Orbit:
    """Orbit in r (m <= 2n+1, start = r0 < rtilde) or hr (m > 2n+1, start = hr0).

    Jtilde defaults to -I(1/rtilde^(n+1)) below and to 0 above; above the
    critical degree the system must be balanced unless Jtilde is given.
    """
    d = as_direction(direction)
    if system.case is CaseTag.ABOVE and Jtilde is None:
        _require_balance(system, tol)
    if d is Direction.FIXED:
        d = Direction.FORWARD
    eng = _engine(system, float(start), d, Jtilde, tol, rtilde)
    rs, res = [float(start)], [0.0]
    return _run(system, eng, rs, res, d, max_iter, r_floor, finite=0, config={
        "start": float(start), "Jtilde": getattr(eng, "Jt", None), "rtilde": getattr(eng, "rt", None),
        "max_iter": max_iter, "r_floor": r_floor, "tol": tol,
    })


def _run(system, eng, rs, res, d, max_iter, r_floor, finite, config):
    term, rmin = "MaxIterations", None
    while len(rs) < max_iter:
        if rs[-1] <= r_floor:
            term, rmin = "FloorReached", rs[-1]
            break
        try:
            x, rr = eng.step()
        except TargetOutOfRange:
            term = "EquationUnsolvable"
            break
        except NotDivergent as exc:
            orb = _orbit(system, d, rs, res, "EquationUnsolvable", None, finite, config)
            raise NotDivergent(str(exc), orbit=orb) from exc
        if x == rs[-1]:
            if rs[0] != x:  # a moving orbit whose step fell below resolution
                term = "EquationUnsolvable"
                break
            rs.append(x)
            res.append(rr)
            continue
        if not x < rs[-1]:
            orb = _orbit(system, d, rs, res, "EquationUnsolvable", None, finite, config)
            raise NotDivergent("orbit stalled", orbit=orb)
        rs.append(x)
        res.append(rr)
    else:
        if rs[-1] <= r_floor:
            term, rmin = "FloorReached", rs[-1]
    return _orbit(system, d, rs, res, term, rmin, finite, config)


def _orbit(system, d, rs, res, term, rmin, finite, config):
    r = np.array(rs, dtype=float)
    ex = y_exponent(system)
    with np.errstate(over="ignore", divide="ignore"):
        y = r ** (-1.0 / ex)
    return Orbit(
        direction=d,
        variable="hr" if system.case is CaseTag.ABOVE else "r",
        exponent=ex,
        r=r,
        y=y,
        residual=np.array(res, dtype=float),
        termination=term,
        r_min=rmin,
        finite_terms=finite,
        config=config,
    )


# -- finite-plane orbit with compactified continuation ----------------------------------


def choose_direction(system: LienardSystem, y0: float, tol: float = DEFAULT_TOL) -> tuple:
    """Direction from the classifier; sign of I(y0) when the classifier cannot say."""
    from .classify import classify

    if system.symmetric:
        return Direction.FIXED, "symmetric"
    try:
        pred = classify(system, tol)
        if pred.direction in (Direction.FORWARD, Direction.INVERSE) and pred.theorem_case not in (
            "InfeasibleAtInfinity", "UnbalancedAbove", "OpenCaseCZero",
        ):
            return pred.direction, f"classifier ({pred.theorem_case})"
    except LienardError:  # classifier failures fall back to the sign test
        pass
    Iy = I_total(system, y0, tol).value
    return (Direction.FORWARD if Iy < 0 else Direction.INVERSE), "sign of I(y0)"


def generate_orbit(
    system: LienardSystem,
    y0: float | None = None,
    direction="auto",
    max_iter: int = DEFAULT_MAX_ITER,
    y_ceiling: float = math.inf,
    tol: float = DEFAULT_TOL,
    finite_terms: int | None = FINITE_TERMS,
    r_floor: float = DEFAULT_R_FLOOR,
) -> Orbit:
    """Orbit of y0 by S or S^-1, tending to +infinity.

    The first ``finite_terms`` iterates are computed in the finite plane;
    the rest continue in the compactified variable (``finite_terms=None``
    keeps everything in the finite plane).  With y0 omitted, y0 starts at
    1e3 and doubles up to 1e9 until the first five iterates increase.
    """
    auto_y0 = y0 is None
    y0 = DEFAULT_Y0 if auto_y0 else float(y0)
    if str(direction) == "auto":
        d, why = choose_direction(system, y0, tol)
    else:
        d, why = as_direction(direction), "requested"
    config = {"y0": y0, "direction": d.value, "direction_source": why, "max_iter": max_iter,
              "y_ceiling": y_ceiling, "tol": tol, "finite_terms": finite_terms, "r_floor": r_floor}
    ex = y_exponent(system)

    if d is Direction.FIXED or system.symmetric:
        orb = Orbit(d, "hr" if system.case is CaseTag.ABOVE else "r", ex, np.array([y0 ** -ex]),
                    np.array([y0]), np.array([0.0]), "EquationUnsolvable", None, 1, config)
        raise NotDivergent("y0 is a fixed point of S", orbit=orb)

    if system.case is CaseTag.ABOVE:
        _require_balance(system, tol)

    def finite_run(start, count):
        ys, res = [start], [0.0]
        while len(ys) < count and ys[-1] < y_ceiling:
            rep = {}
            s = slow_relation(system, ys[-1], d, tol, _report=rep)
            if not s > ys[-1] * (1 + 4 * np.finfo(float).eps):
                return ys, res, False
            ys.append(s)
            res.append(rep["residual"])
        return ys, res, True

    n_fin = max_iter if finite_terms is None else max(1, min(finite_terms, max_iter))
    while True:
        ys, res, ok = finite_run(y0, min(n_fin, 5) if auto_y0 else n_fin)
        if ok or not auto_y0 or y0 * 2 > MAX_Y0:
            break
        y0 *= 2.0
    config["y0"] = y0
    if not ok:
        orb = _orbit_from_y(system, d, ys, res, "EquationUnsolvable", None, len(ys), config)
        raise NotDivergent("orbit stalled: y0 too small or the relation does not push outwards", orbit=orb)
    if auto_y0 and len(ys) < n_fin:
        more, mres, ok = finite_run(ys[-1], n_fin - len(ys) + 1)
        ys += more[1:]
        res += mres[1:]
        if not ok:
            orb = _orbit_from_y(system, d, ys, res, "EquationUnsolvable", None, len(ys), config)
            raise NotDivergent("orbit stalled", orbit=orb)

    if len(ys) >= max_iter or finite_terms is None or ys[-1] >= y_ceiling:
        term = "FloorReached" if ys[-1] >= y_ceiling else "MaxIterations"
        rmin = ys[-1] ** -ex if term == "FloorReached" else None
        return _orbit_from_y(system, d, ys, res, term, rmin, len(ys), config)

    # continue in the compactified variable
    rs = [y ** -ex for y in ys]
    if system.case is not CaseTag.ABOVE:
        rt = charts.default_rtilde(system)
        while rs[-1] >= rt:
            more, mres, ok = finite_run(ys[-1], 2)
            if not ok:
                orb = _orbit_from_y(system, d, ys, res, "EquationUnsolvable", None, len(ys), config)
                raise NotDivergent("orbit stalled", orbit=orb)
            ys.append(more[-1])
            res.append(mres[-1])
            rs.append(more[-1] ** -ex)
    eng = _engine(system, rs[-1], d, None, tol)
    return _run(system, eng, rs, res, d, max_iter, r_floor, finite=len(ys), config=config)


def _orbit_from_y(system, d, ys, res, term, rmin, finite, config):
    ex = y_exponent(system)
    y = np.array(ys, dtype=float)
    return Orbit(d, "hr" if system.case is CaseTag.ABOVE else "r", ex, y ** -ex, y,
                 np.array(res, dtype=float), term, rmin, finite, config)


def defining_residuals(system: LienardSystem, orbit: Orbit, tol: float = DEFAULT_TOL) -> np.ndarray:
    """|I_-(y_l) - I_+(y_{l+1})| (or the swapped identity) for the finite-plane part."""
    out = []
    side = Side.PLUS if orbit.direction is Direction.FORWARD else Side.MINUS
    sgn = 1.0 if orbit.direction is Direction.FORWARD else -1.0
    for y1, y2 in zip(orbit.y[: orbit.finite_terms - 1], orbit.y[1: orbit.finite_terms]):
        T = sgn * I_total(system, y1, tol).value
        out.append(abs(I_branch_between(system, y1, y2, side, tol).value - T))
    return np.array(out)
