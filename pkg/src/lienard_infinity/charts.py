"""Charts near infinity, curves of singularities there, and the blow-up catalog.

Directional charts use x = s / r^p, y = ybar / r^Q (s = +1 for PosX, -1 for
NegX).  After multiplying by r^(Q-p) the field is

    r'    = -alpha r Delta
    ybar' = -eps r^e E(r) - beta ybar Delta,      Delta = ybar - r^k R(r)

with alpha = s/p, beta = sQ/p, k = Q - p(n+1), e = 2Q - p(m+1),
R(r) = r^(p(n+1)) F(s r^-p) and E(r) = -r^(pm) G(s r^-p).  The blow-up
charts below are exact transforms of this field, not truncations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import CatalogMismatch, ChartMismatch, NewtonDivergence
from .integrals import I_total, tail_kernel
from .model import CaseTag, LienardSystem, Side, as_side, branch_inverse
from .quadrature import IntegralValue, adaptive

EIG_TOL = 1e-8


# -- chart bookkeeping ------------------------------------------------------------

DIRECTIONS = ("PosX", "NegX", "PosY")
KINDS = ("directional", "family", "phase_y+", "phase_y-", "phase_r")


def expected_degree(system: LienardSystem):
    if system.case is not CaseTag.ABOVE:
        return (1, system.n + 1)
    if system.m % 2:
        return (1, (system.m + 1) // 2)
    return (2, system.m + 1)


@dataclass(frozen=True)
class Chart:
    case: CaseTag
    direction: str
    degree: tuple
    kind: str = "directional"

    @property
    def id(self):
        return self.direction if self.kind == "directional" else f"{self.kind}:{self.direction}"

    @property
    def variables(self):
        if self.kind == "directional":
            return ("r", "xbar") if self.direction == "PosY" else ("r", "ybar")
        if self.kind == "family":
            return ("rt", "yt")
        if self.kind == "phase_r":
            return ("yt", "v", "et")
        return ("rt", "v", "et")


def chart(system: LienardSystem, direction="PosX", kind="directional") -> Chart:
    if direction not in DIRECTIONS or kind not in KINDS:
        raise ChartMismatch(f"unknown chart {kind}:{direction}")
    return Chart(system.case, direction, expected_degree(system), kind)


def _check_chart(system, ch: Chart):
    if ch.case is not system.case or tuple(ch.degree) != expected_degree(system):
        raise ChartMismatch(
            f"chart {ch.id} of degree {tuple(ch.degree)} does not fit case {system.case.value} with m={system.m}"
        )
    if ch.kind != "directional":
        if system.case is not CaseTag.ABOVE:
            raise ChartMismatch("blow-up charts exist only when m > 2n+1")
        if ch.direction == "PosY":
            raise ChartMismatch("the blow-up sits in the x-directions")


@dataclass(frozen=True)
class _Params:
    s: int
    p: int
    Q: int
    alpha: float
    beta: float
    k: int
    e: int
    R: np.ndarray  # coefficients in r
    E: np.ndarray


@lru_cache(maxsize=256)
def _params(system: LienardSystem, direction: str) -> _Params:
    p, Q = expected_degree(system)
    s = 1 if direction == "PosX" else -1
    n, m = system.n, system.m
    R = np.zeros(p * (n + 1) + 1)
    R[0] = float(s ** (n + 1))
    for k, bk in enumerate(system.b):
        R[p * (n + 1 - k)] += bk * s ** k
    E = np.zeros(p * m + 1)
    E[0] = system.A * s ** m
    for k, ak in enumerate(system.a):
        E[p * (m - k)] += ak * s ** k
    return _Params(s, p, Q, s / p, s * Q / p, Q - p * (n + 1), 2 * Q - p * (m + 1), R, E)


def _pv(x, c):
    # Horner evaluation that is safe for complex arguments
    out = 0.0 * x + c[-1]
    for ci in c[-2::-1]:
        out = out * x + ci
    return out


def _field(system, ch: Chart, epsilon, v=0.0):
    n, m = system.n, system.m
    if ch.direction == "PosY":
        p, Q = ch.degree
        k = Q - p * (n + 1)
        e = 2 * Q - p * (m + 1)

        def f(z):
            r, xb = z
            RY = xb ** (n + 1) + sum(bk * xb ** j * r ** (p * (n + 1 - j)) for j, bk in enumerate(system.b))
            EY = system.A * xb ** m + sum(ak * xb ** j * r ** (p * (m - j)) for j, ak in enumerate(system.a))
            return (
                epsilon / Q * r ** (1 + e) * EY,
                1.0 - r ** k * RY + p * epsilon / Q * xb * r ** e * EY,
            )

        return f

    pr = _params(system, ch.direction)
    al, be, k, e = pr.alpha, pr.beta, pr.k, pr.e
    R = lambda r: _pv(r, pr.R)  # noqa: E731
    E = lambda r: _pv(r, pr.E)  # noqa: E731

    if ch.kind == "directional":

        def f(z):
            r, yb = z
            D = yb - r ** k * R(r)
            return (-al * r * D, -epsilon * r ** e * E(r) - be * yb * D)

    elif ch.kind == "family":

        def f(z):
            rt, yt = z
            D = yt - rt ** k * R(v * rt)
            return (-al * rt * D, -E(v * rt) - be * yt * D)

    elif ch.kind in ("phase_y+", "phase_y-"):
        sg = 1.0 if ch.kind == "phase_y+" else -1.0

        def f(z):
            rt, vv, et = z
            D = sg - rt ** k * R(vv * rt)
            Ev = E(vv * rt)
            return (
                rt * (sg * et * Ev / k + (be / k - al) * D),
                -vv * (sg * et * Ev + be * D) / k,
                2.0 * et * (sg * et * Ev + be * D),
            )

    else:  # phase_r

        def f(z):
            yt, vv, et = z
            D = yt - R(vv)
            return (-et * E(vv) - (be - k * al) * yt * D, -al * vv * D, 2 * k * al * et * D)

    return f


def chart_vector_field(system: LienardSystem, ch: Chart, epsilon: float, point, v: float = 0.0):
    """The multiplied chart field at ``point``.

    ``epsilon`` is used by the directional charts; blow-up phase charts carry
    their own rescaled epsilon as the last coordinate.  ``v`` is the radial
    blow-up variable for the family chart (0 gives the printed limit system).
    """
    _check_chart(system, ch)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    pt = [float(c) for c in point]
    if len(pt) != len(ch.variables):
        raise ValueError(f"chart {ch.id} has coordinates {ch.variables}")
    first = pt[0] if ch.kind != "phase_r" else pt[1]
    if first < 0:
        raise ValueError("radial coordinate must be nonnegative")
    return np.array([complex(c).real for c in _field(system, ch, epsilon, v)(pt)])


def jacobian(system: LienardSystem, ch: Chart, epsilon: float, point, v: float = 0.0, h: float = 1e-30):
    """Complex-step Jacobian; exact to rounding for these polynomial fields."""
    _check_chart(system, ch)
    f = _field(system, ch, epsilon, v)
    pt = np.array(point, dtype=float)
    d = pt.size
    J = np.zeros((d, d))
    for j in range(d):
        z = pt.astype(complex)
        z[j] += 1j * h
        J[:, j] = np.imag(np.array(f(list(z)), dtype=complex)) / h
    return J


# -- slow dynamics and feasibility --------------------------------------------------


def slow_dynamics_at_infinity(system: LienardSystem, ch: Chart, r: float) -> dict:
    """Reduced flow along the curve of singularities in an x-chart.

    r' = alpha r^(e+1) E / (beta W - alpha r W') with W = r^k R.
    """
    _check_chart(system, ch)
    if ch.kind != "directional" or ch.direction == "PosY":
        raise ChartMismatch("slow dynamics at infinity is read in the x-charts")
    pr = _params(system, ch.direction)
    r = float(r)
    if r <= 0:
        raise ValueError("r must be positive")
    al, be, k, e = pr.alpha, pr.beta, pr.k, pr.e
    R = P.polyval(r, pr.R)
    dR = P.polyval(r, P.polyder(pr.R))
    W = r ** k * R
    dW = k * r ** (k - 1) * R + r ** k * dR if k > 0 else dR
    val = al * r ** (e + 1) * P.polyval(r, pr.E) / (be * W - al * r * dW)
    R0, E0 = pr.R[0], pr.E[0]
    coef = al * E0 / ((be - k * al) * R0)
    return {
        "value": float(val),
        "sign": int(np.sign(val)),
        "direction": "away" if val > 0 else "towards",
        "leading_coefficient": float(coef),
        "leading_power": e + 1 - k,
    }


def canard_at_infinity_feasible(system: LienardSystem):
    n, m, A = system.n, system.m, system.A
    if n % 2 == 0:
        return False, "n must be odd"
    case = system.case
    if case is CaseTag.BELOW:
        if m % 2 == 1 and A == 1.0:
            return True, "A = 1 with m and n odd"
        return False, "needs A = 1 with m and n odd"
    if case is CaseTag.CRITICAL:
        if A > 0:
            return True, "A > 0 with n odd"
        return False, "needs A > 0"
    if m % 2 == 0:
        return False, "m even above the critical degree"
    if A == 1.0:
        return True, "m odd, A = 1, n odd"
    return False, "needs A = 1"


# -- singularity catalog ----------------------------------------------------------------


@dataclass(frozen=True)
class SingularityInfo:
    chart: str
    location: tuple
    eigenvalues: tuple
    symbolic: tuple
    kind: str
    note: str = ""

    def to_dict(self):
        return {
            "chart": self.chart,
            "location": {k: v for k, v in self.location},
            "eigenvalues": list(self.eigenvalues),
            "symbolic": list(self.symbolic),
            "kind": self.kind,
            "note": self.note,
        }


def classify_eigenvalues(ev, tol=1e-10):
    ev = [float(x) for x in ev]
    zero = [abs(x) <= tol for x in ev]
    if all(zero):
        return "LinearlyZero"
    if any(zero):
        return "SemiHyperbolic"
    if all(x > 0 for x in ev):
        return "HyperbolicNode(repelling)"
    if all(x < 0 for x in ev):
        return "HyperbolicNode(attracting)"
    return "HyperbolicSaddle"


def _symbolic_entries(system: LienardSystem):
    """(chart, direction, kind, location, symbolic eigenvalues, note) in closed form."""
    n, m, A = system.n, system.m, system.A
    out = []
    if system.case is not CaseTag.ABOVE:
        sn = (-1) ** n
        out.append(("PosX", "directional", (("r", 0.0), ("ybar", 0.0)), (1.0, n + 1.0), ""))
        out.append(("PosX", "directional", (("r", 0.0), ("ybar", 1.0)), (0.0, -(n + 1.0)),
                    "ybar-axis stable, curve of singularities as center manifold"))
        out.append(("NegX", "directional", (("r", 0.0), ("ybar", 0.0)), (sn * 1.0, sn * (n + 1.0)), ""))
        out.append(("NegX", "directional", (("r", 0.0), ("ybar", -sn * 1.0)), (0.0, -sn * (n + 1.0)), ""))
        return out

    K = m - 2 * n - 1
    odd = m % 2 == 1
    half = 1.0 if odd else 0.5  # |alpha|
    scale = 2.0 if odd else 1.0  # 1/k relative to 1/K
    for direction in ("PosX", "NegX"):
        out.append((direction, "directional", (("r", 0.0), ("ybar", 0.0)), (0.0, 0.0),
                    "blown up in the family charts"))
    # family chart nodes
    for direction, s in (("PosX", 1), ("NegX", -1)):
        E0 = A * s ** m
        beta = s * (m + 1) / 2.0
        y2 = -E0 / beta
        if y2 > 0:
            y0 = math.sqrt(y2)
            for yy in (y0, -y0):
                ev = (-s * half * yy, -2 * beta * yy)
                out.append((direction, "family", (("rt", 0.0), ("yt", yy)), ev, ""))
    # saddle at rt = 0 in {yt = +1} on PosX; the other three cells flip sign
    sat = (scale * (n + 1) / K, -(m + 1) / (K if odd else 2.0 * K), m + 1.0)
    R0 = {"PosX": 1, "NegX": (-1) ** (n + 1)}
    for direction, s in (("PosX", 1), ("NegX", -1)):
        for kind, sg in (("phase_y+", 1), ("phase_y-", -1)):
            f = s * sg
            out.append((direction, kind, (("rt", 0.0), ("v", 0.0), ("et", 0.0)), tuple(f * x for x in sat), ""))
            if R0[direction] == sg:
                lam = -(n + 1.0) * s * sg
                note = "stable manifold {v = et = 0}" if lam < 0 else "unstable manifold {v = et = 0}"
                out.append((direction, kind, (("rt", 1.0), ("v", 0.0), ("et", 0.0)), (lam, 0.0, 0.0),
                            note + ", two-dimensional center manifold"))
        sr = 1.0 if direction == "PosX" else float((-1) ** n)
        out.append((direction, "phase_r", (("yt", 0.0), ("v", 0.0), ("et", 0.0)),
                    tuple(sr * x for x in (n + 1.0, half, 2.0 * n + 1 - m)), ""))
    return out


def _match(numeric, symbolic):
    """Order numeric eigenvalues to follow the symbolic tuple; return max deviation."""
    remaining = list(numeric)
    ordered = []
    for sv in symbolic:
        i = int(np.argmin([abs(x - sv) for x in remaining]))
        ordered.append(remaining.pop(i))
    dev = max((abs(a - b) / max(1.0, abs(b)) for a, b in zip(ordered, symbolic)), default=0.0)
    return tuple(ordered), dev


def singularity_catalog(system: LienardSystem, tol: float = EIG_TOL):
    """Singularities at infinity for epsilon = 0, with Jacobian eigenvalues.

    Each entry's eigenvalues come from the complex-step Jacobian of the chart
    field and are checked against the closed-form tuple.
    """
    entries = []
    for direction, kind, loc, sym, note in _symbolic_entries(system):
        ch = chart(system, direction, kind)
        pt = [v for _, v in loc]
        J = jacobian(system, ch, 0.0, pt)
        ev = np.linalg.eigvals(J)
        if np.max(np.abs(ev.imag)) > tol:
            raise CatalogMismatch(f"complex eigenvalues at {ch.id} {loc}")
        f0 = chart_vector_field(system, ch, 0.0, pt)
        if np.max(np.abs(f0)) > tol:
            raise CatalogMismatch(f"{ch.id} {loc} is not a singularity (field {f0})")
        ordered, dev = _match(ev.real, sym)
        if dev > tol:
            raise CatalogMismatch(f"{ch.id} {loc}: eigenvalues {ordered} vs {sym}")
        extra = note
        if kind == "directional" and direction != "PosY" and system.case is not CaseTag.ABOVE and loc[1][1] != 0.0:
            sd = slow_dynamics_at_infinity(system, ch, 1e-3)
            extra = (note + "; " if note else "") + f"slow dynamics points {sd['direction']} r=0"
        entries.append(SingularityInfo(ch.id, loc, tuple(float(x) + 0.0 for x in ordered), tuple(float(x) + 0.0 for x in sym),
                                       classify_eigenvalues(ordered), extra))
    return entries


# -- curves of singularities in the positive y-direction ----------------------------------


def _phi_newton(system, r, side, seed=None, maxit=60):
    s = as_side(side).sign
    n = system.n
    r = np.asarray(r, dtype=float)
    # only the nonzero coefficients, with their powers of r computed once
    terms = [(k, system.b[k] * r ** (n + 1 - k)) for k in range(n + 1) if system.b[k] != 0.0]
    if seed is None:
        corr = sum((c * s ** k for k, c in terms), 0.0 * r)
        x = s - corr / ((n + 1) * s ** n)
    else:
        x = np.full_like(r, float(seed))
    tiny = 4 * np.finfo(float).eps

    def fd(x):
        xn = x ** n
        f = x * xn - 1.0
        d = (n + 1) * xn
        for k, c in terms:
            f = f + c * x ** k
            if k:
                d = d + k * c * x ** (k - 1)
        return f, d

    for _ in range(maxit):
        f, d = fd(x)
        step = f / d
        x = x - step
        if np.max(np.abs(step) / np.maximum(np.abs(x), 1.0), initial=0.0) <= tiny:
            break
    f, _ = fd(x)
    good = np.isfinite(x) & (np.abs(f) <= 1e-12) & (np.sign(x) == s)
    return x, good


@lru_cache(maxsize=128)
def rtilde_max(system: LienardSystem) -> float:
    """Largest dyadic r <= 1/2 below which Newton for Phi converges from the seeds +-1.

    Convergence must hold at every dyadic point beneath it and the root must be
    the branch continued from r = 0 (checked against r * omega(r^-(n+1))).
    """
    if system.case is CaseTag.ABOVE:
        raise ChartMismatch("Phi is used when m <= 2n+1")
    rs = 0.5 * 2.0 ** -np.arange(0, 40)
    valid = np.ones(rs.size, dtype=bool)
    for side in (Side.MINUS, Side.PLUS):
        x, good = _phi_newton(system, rs, side, seed=side.sign)
        for i, r in enumerate(rs):
            if not good[i]:
                valid[i] = False
                continue
            ref = r * branch_inverse(system, r ** -(system.n + 1), side)
            if abs(ref - x[i]) > 1e-10:
                valid[i] = False
    best = None
    for i in range(rs.size - 1, -1, -1):
        if not valid[i]:
            break
        best = rs[i]
    if best is None:
        raise NewtonDivergence("no admissible chart radius")
    return float(best)


def default_rtilde(system: LienardSystem) -> float:
    return rtilde_max(system) / 2.0


def phi(system: LienardSystem, r, side):
    """Phi_-(r) (through +1) or Phi_+(r) (through -1); vectorised in r."""
    rmax = rtilde_max(system)
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(r_arr > rmax):
        raise NewtonDivergence(f"r outside [0, {rmax}]")
    x, good = _phi_newton(system, r_arr, side)
    if not np.all(good):
        raise NewtonDivergence("Newton for Phi did not converge")
    return float(x) if np.ndim(r) == 0 else x


def _hr_exponent(system):
    return (system.m + 1) / (2.0 * (system.n + 1))


def psi(system: LienardSystem, hr, side):
    """psi_s(hr) = 1/|branch(hr^-((m+1)/2))| for m > 2n+1, by Newton on
    psi^(n+1) = hr^((m+1)/2) * Fhat_s(psi)."""
    if system.case is not CaseTag.ABOVE:
        raise ChartMismatch("psi is used when m > 2n+1")
    side = as_side(side)
    hr_arr = np.asarray(hr, dtype=float)
    if np.any(hr_arr < 0):
        raise ValueError("hr must be nonnegative")
    Fs, _, _ = system.side_polys(side)
    Fhat = Fs[::-1]
    dFhat = P.polyder(Fhat)
    n = system.n
    c = hr_arr ** ((system.m + 1) / 2.0)
    x = hr_arr ** _hr_exponent(system)
    for _ in range(80):
        f = x ** (n + 1) - c * P.polyval(x, Fhat)
        d = (n + 1) * x ** n - c * P.polyval(x, dFhat)
        with np.errstate(invalid="ignore", divide="ignore"):
            step = np.where(d != 0, f / d, 0.0)
        x = x - step
        if np.all(np.abs(step) <= 4 * np.finfo(float).eps * np.abs(x)):
            break
    with np.errstate(invalid="ignore"):
        res = np.abs(x - hr_arr ** _hr_exponent(system) * P.polyval(x, Fhat) ** (1.0 / (n + 1)))
    if not np.all(np.isfinite(x)) or np.any(res > 1e-12) or np.any(x < 0):
        raise NewtonDivergence("psi iteration failed")
    return float(x) if np.ndim(hr) == 0 else x


def hr_from_rho(system: LienardSystem, rho, side):
    """Inverse of psi: hr = (rho^(n+1) / Fhat_s(rho))^(2/(m+1))."""
    Fs, _, _ = system.side_polys(as_side(side))
    rho = np.asarray(rho, dtype=float)
    return (rho ** (system.n + 1) / P.polyval(rho, Fs[::-1])) ** (2.0 / (system.m + 1))


@dataclass(frozen=True)
class BranchCurve:
    system: LienardSystem
    side: Side

    def __call__(self, t):
        if self.system.case is CaseTag.ABOVE:
            return psi(self.system, t, self.side)
        return phi(self.system, t, self.side)


def branch_curve(system, side) -> BranchCurve:
    return BranchCurve(system, as_side(side))


# -- compactified slow divergence integrals ---------------------------------------------


def j_kernel(system: LienardSystem, side):
    """Integrand j_s(r) with J_s(r) = int_r^rtilde j_s; uses Phi at every node."""
    side = as_side(side)
    n, m, A = system.n, system.m, system.A
    b, a = system.b, system.a

    bt = [(k, k * b[k]) for k in range(1, n + 1) if b[k] != 0.0]
    at = [(k, a[k]) for k in range(m) if a[k] != 0.0]

    def f(s):
        s = np.asarray(s, dtype=float)
        x, good = _phi_newton(system, s, side)
        if not np.all(good):
            raise NewtonDivergence("Newton for Phi did not converge inside an integral")
        N = (n + 1) * x ** n
        for k, c in bt:
            N = N + c * s ** (n + 1 - k) * x ** (k - 1)
        D = A * x ** m
        for k, c in at:
            D = D + c * s ** (m - k) * x ** k
        return -(n + 1) * N / (s ** (2 * n + 2 - m) * D)

    return f


def _geo(lo, hi, ratio=1.5):
    k = max(1, int(np.ceil(np.log(hi / lo) / np.log(ratio))))
    pts = lo * (hi / lo) ** (np.arange(k + 1) / k)
    pts[0], pts[-1] = lo, hi
    return pts


def J_branch(system: LienardSystem, r: float, side, rtilde: float | None = None, tol: float = 1e-10) -> IntegralValue:
    """J_s(r) = int_r^rtilde j_s(s) ds for m <= 2n+1."""
    if system.case is CaseTag.ABOVE:
        raise ChartMismatch("J_s is defined when m <= 2n+1")
    rt = default_rtilde(system) if rtilde is None else float(rtilde)
    if rt > rtilde_max(system):
        raise NewtonDivergence("rtilde beyond the chart radius")
    r = float(r)
    if not 0 < r <= rt:
        raise ValueError("need 0 < r <= rtilde")
    if r == rt:
        return IntegralValue(0.0, 0.0)
    return adaptive(j_kernel(system, side), _geo(r, rt), tol=tol)


def Jbar_branch(system: LienardSystem, rho: float, side, tol: float = 1e-12) -> IntegralValue:
    """Jbar_s(rho) = int_0^rho of the tail kernel (m > 2n+1)."""
    if rho == 0:
        return IntegralValue(0.0, 0.0)
    return adaptive(tail_kernel(system, side), [0.0, rho / 4, rho / 2, rho], tol=tol)


def Jhat_branch(system: LienardSystem, hr: float, side, tol: float = 1e-12) -> IntegralValue:
    """Jhat_s(hr) = Jbar_s(psi_s(hr)) = I_s(+inf) - I_s(y) with y = hr^(-(m+1)/2)."""
    if system.case is not CaseTag.ABOVE:
        raise ChartMismatch("Jhat is defined when m > 2n+1")
    if hr <= 0:
        return IntegralValue(0.0, 0.0)
    return Jbar_branch(system, psi(system, hr, side), side, tol)


def Jtilde(system: LienardSystem, rtilde: float | None = None, tol: float = 1e-10) -> float:
    """-I(1/rtilde^(n+1)) for m <= 2n+1; 0 above (balanced systems)."""
    if system.case is CaseTag.ABOVE:
        return 0.0
    rt = default_rtilde(system) if rtilde is None else float(rtilde)
    return -I_total(system, rt ** -(system.n + 1), tol).value
