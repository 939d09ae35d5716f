"""Decision trees for the orbit near infinity: direction, box dimension, checks.

Dimensions are exact Fractions of (n, m, j_a, j_b).  The only numerical
input is I_*, and a branch that needs I_* = 0 is taken when
|I_*| <= 1e-6 * scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from . import charts, fractal
from .errors import (
    AssumptionBrokenByTuning,
    AssumptionViolation,
    ExtrapolationUnstable,
    LienardError,
    NoBalancedSystemInBracket,
)
from .integrals import DEFAULT_TOL, InfinityBehavior, I_star_direct, infinity_behavior
from .model import CaseTag, Direction, LienardSystem, lead_a, lead_b, parity_profile, validate

ZERO_RTOL = 1e-6
DIM_TOL = 0.05
GAP_TOL = 0.05
RATIO_TOL = 0.01
# geometric orbits need many decades before the neighbourhood slope settles
GEOMETRIC_R_FLOOR = 1e-100

FORWARD, INVERSE, FIXED = Direction.FORWARD, Direction.INVERSE, Direction.FIXED


@dataclass(frozen=True)
class Prediction:
    theorem_case: str
    predicted_dim: Fraction | None
    direction: Direction
    i_behavior: InfinityBehavior | None
    nondegenerate_predicted: bool
    unresolved: bool = False
    coefficient_direction: Direction | None = None
    details: dict = field(default_factory=dict)

    @property
    def gap_exponent(self) -> Fraction | None:
        """beta in r_l - r_{l+1} ~ r_l^beta; 1 means geometric decay."""
        if self.predicted_dim is None:
            return None
        return 1 / (1 - self.predicted_dim)

    def to_dict(self):
        d = self.predicted_dim
        g = self.gap_exponent
        return {
            "theorem_case": self.theorem_case,
            "predicted_dim": None if d is None else float(d),
            "predicted_dim_exact": None if d is None else f"{d.numerator}/{d.denominator}",
            "gap_exponent": None if g is None else float(g),
            "direction": self.direction.value,
            "coefficient_direction": None if self.coefficient_direction is None else self.coefficient_direction.value,
            "nondegenerate_predicted": self.nondegenerate_predicted,
            "unresolved": self.unresolved,
            "i_behavior": None if self.i_behavior is None else self.i_behavior.to_dict(),
            "details": self.details,
        }

    def summary(self) -> str:
        if self.theorem_case == "Symmetric":
            return "Symmetric: S is the identity"
        if self.predicted_dim is None:
            return f"{self.theorem_case}: no dimension predicted"
        d = self.predicted_dim
        return f"{self.theorem_case}: orbit by {self.direction.value}, dim {d.numerator}/{d.denominator}"


# -- exact formulas --------------------------------------------------------------


def dim_b_family(n, j_b):
    return Fraction(n - 2 * j_b, n + 1 - 2 * j_b)


def dim_a_family(m, j_a):
    return Fraction(m - 2 * j_a, m + 1 - 2 * j_a)


def dim_converging(n, m):
    return Fraction(2 * n + 1 - m, 2 * n + 2 - m)


def dim_above(n, m, k):
    return Fraction(k * (m + 1), k * (m + 1) + 2 * (n + 1))


def _sgn_dir(negative_means_forward: float) -> Direction:
    return FORWARD if negative_means_forward < 0 else INVERSE


def _is_zero(value, scale=1.0):
    return abs(value) <= ZERO_RTOL * max(scale, 1.0)


# -- classification -----------------------------------------------------------------


def classify(system: LienardSystem, tol: float = DEFAULT_TOL) -> Prediction:
    """Theorem case, orbit direction and predicted box dimension."""
    rep = validate(system)
    if not rep.ok:
        raise AssumptionViolation("; ".join(rep.violations))
    feasible, why = charts.canard_at_infinity_feasible(system)
    if not feasible:
        return Prediction("InfeasibleAtInfinity", None, FIXED, None, False, details={"reason": why})
    prof = parity_profile(system)
    if prof.b_o_zero and prof.a_e_zero:
        return Prediction("Symmetric", None, FIXED, infinity_behavior(system, tol), False,
                          details={"parity": prof.to_dict()})
    case = system.case
    if case is CaseTag.BELOW:
        return _below(system, prof, tol)
    if case is CaseTag.CRITICAL:
        return _critical(system, prof, tol)
    return _above(system, prof, tol)


def _branch(prof, n, m):
    """'b', 'a' or 'tie': which asymmetric term leads."""
    if prof.j_b is not None and (prof.a_e_zero or n - 2 * prof.j_b < m - 2 * prof.j_a):
        return "b"
    if prof.j_a is not None and (prof.b_o_zero or n - 2 * prof.j_b > m - 2 * prof.j_a):
        return "a"
    return "tie"


def _istar(system, tol):
    """(InfinityBehavior, I_* or None when extrapolation is unstable, diagnostics)."""
    try:
        ib = infinity_behavior(system, tol)
    except ExtrapolationUnstable as exc:
        return None, None, {"extrapolation": str(exc), **{k: v for k, v in exc.diagnostics.items() if k != "I"}}
    return ib, ib.I_star.value, {}


def _below(system, prof, tol):
    n, m = system.n, system.m
    which = _branch(prof, n, m)
    details = {"parity": prof.to_dict(), "leading_term": which}
    if which == "tie" and prof.C == 0:
        return Prediction("OpenCaseCZero", None, FIXED, None, False, details=details)
    if which == "a":
        e = 2 * m - 2 * n - 2 * prof.j_a - 1
        tag = "T1.2"
        dim_leading = dim_a_family(m, prof.j_a)
        # I -> -inf when a < 0; I_* = 0 branch: S for a > 0
        div_key = lead_a(system, prof)
        zero_dir = FORWARD if lead_a(system, prof) > 0 else INVERSE
    else:
        e = m - n - 2 * prof.j_b - 1
        tag = "T1.1" if which == "b" else "T1.3"
        dim_leading = dim_b_family(n, prof.j_b)
        key = lead_b(system, prof) * (m - n + 2 * prof.j_b + 1) if which == "b" else prof.C
        div_key = -key  # I -> -inf when key > 0
        zero_key = lead_b(system, prof) if which == "b" else prof.C
        zero_dir = FORWARD if zero_key < 0 else INVERSE
    details["exponent"] = e
    if e < 0:
        ib = infinity_behavior(system, tol)
        d = _sgn_dir(div_key)
        return Prediction(tag + "a", dim_leading, d, ib, True, details=details)
    ib, I_star, diag = _istar(system, tol)
    details.update(diag)
    if I_star is None:
        return Prediction(tag + "b(unresolved)", None, zero_dir, None, False, unresolved=True,
                          coefficient_direction=zero_dir, details=details)
    details["I_star"] = I_star
    if _is_zero(I_star):
        return Prediction(tag + "b(I*=0)", dim_leading, zero_dir, ib, True, coefficient_direction=zero_dir,
                          details=details)
    d = FORWARD if I_star < 0 else INVERSE
    label = tag + ("b(I*<0)" if I_star < 0 else "b(I*>0)")
    return Prediction(label, dim_converging(n, m), d, ib, True, coefficient_direction=zero_dir, details=details)


def _critical(system, prof, tol):
    n, m = system.n, system.m
    which = _branch(prof, n, m)
    details = {"parity": prof.to_dict(), "leading_term": which}
    ib, I_star, diag = _istar(system, tol)
    details.update(diag)
    if which == "b":
        zero_dir, dim0, tag = (FORWARD if lead_b(system, prof) < 0 else INVERSE), dim_b_family(n, prof.j_b), "T2.2"
    elif which == "a":
        zero_dir = FORWARD if lead_a(system, prof) > 0 else INVERSE
        dim0, tag = Fraction(2 * n + 1 - 2 * prof.j_a, 2 * n + 2 - 2 * prof.j_a), "T2.3"
    else:
        zero_dir = None if prof.C == 0 else (FORWARD if prof.C < 0 else INVERSE)
        dim0, tag = dim_b_family(n, prof.j_b), "T2.4"
    if I_star is None:
        return Prediction("T2(unresolved)", None, zero_dir or FIXED, None, False, unresolved=True,
                          coefficient_direction=zero_dir, details=details)
    details["I_star"] = I_star
    if not _is_zero(I_star):
        d = FORWARD if I_star < 0 else INVERSE
        return Prediction("T2.1", Fraction(0), d, ib, False, coefficient_direction=zero_dir, details=details)
    if zero_dir is None:
        return Prediction("OpenCaseCZero", None, FIXED, ib, False, details=details)
    return Prediction(tag, dim0, zero_dir, ib, True, coefficient_direction=zero_dir, details=details)


def _above(system, prof, tol):
    from .relation import balance_status

    n, m = system.n, system.m
    st = balance_status(system, tol)
    details = {"parity": prof.to_dict(), "balance": st}
    ib = infinity_behavior(system, tol)
    if not st["balanced"]:
        return Prediction("UnbalancedAbove", None, FIXED, ib, False, details=details)
    which = _branch(prof, n, m)
    details["leading_term"] = which
    if which == "b":
        d = FORWARD if lead_b(system, prof) < 0 else INVERSE
        return Prediction("T3.1", dim_above(n, m, n - 2 * prof.j_b), d, ib, True, coefficient_direction=d, details=details)
    if which == "a":
        d = FORWARD if lead_a(system, prof) > 0 else INVERSE
        return Prediction("T3.2", dim_above(n, m, m - 2 * prof.j_a), d, ib, True, coefficient_direction=d, details=details)
    if prof.C == 0:
        return Prediction("OpenCaseCZero", None, FIXED, ib, False, details=details)
    d = FORWARD if prof.C < 0 else INVERSE
    return Prediction("T3.3", dim_above(n, m, n - 2 * prof.j_b), d, ib, True, coefficient_direction=d, details=details)


# -- verification -----------------------------------------------------------------------


@dataclass
class VerificationReport:
    report: dict
    orbit: object = None

    @property
    def status(self):
        return self.report["status"]

    def to_dict(self):
        return self.report


def verify(system: LienardSystem, prediction: Prediction | None = None, orbit_budget: int = 10_000,
           y0: float | None = None, tol: float = DEFAULT_TOL, r_floor: float | None = None) -> VerificationReport:
    """Generate an orbit in the predicted direction and compare both estimators with the prediction."""
    from .relation import DEFAULT_R_FLOOR, generate_orbit

    pred = classify(system, tol) if prediction is None else prediction
    report = {"prediction": pred.to_dict(), "orbit_budget": orbit_budget, "tolerances": {
        "dimension": DIM_TOL, "gap_exponent": GAP_TOL, "ratio": RATIO_TOL, "quadrature": tol,
        "nondegeneracy_ratio": fractal.NONDEGENERACY_THRESHOLD}}
    if pred.theorem_case == "Symmetric":
        report["status"] = "fixed point, nothing to verify"
        return VerificationReport(report)
    if pred.predicted_dim is None:
        report["status"] = "no dimension predicted, nothing to verify"
        return VerificationReport(report)
    if r_floor is None:
        r_floor = GEOMETRIC_R_FLOOR if pred.predicted_dim == 0 else DEFAULT_R_FLOOR
    report["tolerances"]["r_floor"] = r_floor
    orbit = generate_orbit(system, y0, pred.direction, max_iter=orbit_budget, tol=tol, r_floor=r_floor)
    report["orbit"] = orbit.to_dict()
    pts = orbit.r
    dim = float(pred.predicted_dim)
    beta = float(pred.gap_exponent)
    est = {}
    for name, fn in (("neighborhood", fractal.dimension_neighborhood), ("gap_law", fractal.dimension_gap_law)):
        try:
            est[name] = fn(pts).to_dict()
        except LienardError as exc:
            est[name] = {"error": type(exc).__name__, "message": str(exc)}
    report["estimates"] = est
    checks = {}
    for name in ("neighborhood", "gap_law"):
        if "value" in est[name]:
            checks[f"{name}_dimension"] = {"estimate": est[name]["value"], "predicted": dim,
                                           "abs_diff": abs(est[name]["value"] - dim),
                                           "ok": abs(est[name]["value"] - dim) <= DIM_TOL}
    if "slope" in est["gap_law"]:
        b = est["gap_law"]["slope"]
        checks["gap_exponent"] = {"estimate": b, "predicted": beta, "abs_diff": abs(b - beta),
                                  "ok": abs(b - beta) <= GAP_TOL if beta > 1 else abs(b - 1) <= GAP_TOL}
    if dim == 0.0:
        tail = pts[-101:]
        q = tail[1:] / tail[:-1]
        spread = float((q.max() - q.min()) / q.mean())
        checks["ratio_constant"] = {"mean_ratio": float(q.mean()), "relative_spread": spread,
                                    "ok": spread <= RATIO_TOL and 0 < q.mean() < 1}
    elif 0 < dim < 1:
        try:
            nd = fractal.nondegeneracy_diagnostic(pts, dim)
            checks["nondegeneracy"] = {**nd, "ok": nd["ratio"] <= fractal.NONDEGENERACY_THRESHOLD}
        except LienardError as exc:
            checks["nondegeneracy"] = {"error": type(exc).__name__, "message": str(exc), "ok": False}
    for c in checks.values():
        if "ok" in c:
            c["ok"] = bool(c["ok"])
    report["checks"] = checks
    report["status"] = "agrees" if all(c.get("ok") for c in checks.values()) else "disagrees"
    return VerificationReport(report, orbit)


# -- balance search ------------------------------------------------------------------


def _balance_scale(system, tol):
    from .integrals import I_branch_infinity
    from .model import Side

    return max(abs(I_branch_infinity(system, Side.MINUS, tol).value), 1.0)


def balance_search(template: LienardSystem, which: str, index: int, bracket: tuple,
                   tol: float = DEFAULT_TOL) -> dict:
    """Tune one coefficient so that I_-(+inf) = I_+(+inf).

    The coefficient must be an odd-index a or an even-index b.  Root finding
    is Brent's method on I_* as a function of the coefficient.
    """
    if template.case is not CaseTag.ABOVE:
        raise AssumptionViolation("balance at infinity concerns m > 2n+1")
    if which not in ("a", "b"):
        raise ValueError("which must be 'a' or 'b'")
    if (which == "a" and index % 2 == 0) or (which == "b" and index % 2 == 1):
        raise AssumptionViolation("tune an odd-index a or an even-index b")
    if not 0 <= index < len(getattr(template, which)):
        raise ValueError("coefficient index out of range")

    def build(c):
        s = template.replace_coefficient(which, index, c)
        rep = validate(s)
        if not rep.ok:
            raise AssumptionBrokenByTuning(f"{which}_{index} = {c!r}: " + "; ".join(rep.violations))
        return s

    def f(c):
        return I_star_direct(build(c), tol * 1e-2).value

    start = getattr(template, which)[index]
    s0 = build(start)
    thr0 = ZERO_RTOL * _balance_scale(s0, tol)
    v0 = I_star_direct(s0, tol * 1e-2).value
    if abs(v0) <= thr0:
        return {"system": s0, "value": start, "shift": 0.0, "I_star": v0, "threshold": thr0}
    lo, hi = float(bracket[0]), float(bracket[1])
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        root = lo
    elif fhi == 0.0:
        root = hi
    elif np.sign(flo) == np.sign(fhi):
        raise NoBalancedSystemInBracket(
            f"I_* keeps its sign on [{lo}, {hi}] ({flo:.6g}, {fhi:.6g})"
        )
    else:
        root = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    s = build(root)
    Istar = I_star_direct(s, tol * 1e-2).value
    thr = ZERO_RTOL * _balance_scale(s, tol)
    if abs(Istar) > thr:
        raise NoBalancedSystemInBracket(f"root finder ended at |I_*| = {abs(Istar):.3e}")
    return {"system": s, "value": float(root), "shift": float(root - start), "I_star": Istar, "threshold": thr}
