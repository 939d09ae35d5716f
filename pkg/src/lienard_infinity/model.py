"""Polynomial Liénard data, assumption checks, parity profile, branch inverses.

The system is

    x' = y - F(x),   y' = eps * G(x)

with F(x) = x^(n+1) + sum b_k x^k and G(x) = -A x^m - sum a_k x^k.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .errors import InvalidSystem, NonConvergence
from .sturm import count_real_roots


class Side(str, Enum):
    MINUS = "minus"  # attracting branch, x > 0
    PLUS = "plus"  # repelling branch, x < 0

    @property
    def sign(self) -> int:
        return 1 if self is Side.MINUS else -1


class CaseTag(str, Enum):
    BELOW = "Below"
    CRITICAL = "Critical"
    ABOVE = "Above"


class Direction(str, Enum):
    FORWARD = "ForwardS"
    INVERSE = "InverseS"
    FIXED = "Fixed"


def as_side(side) -> Side:
    if isinstance(side, Side):
        return side
    return Side(str(side).lower())


def _finite_tuple(name, values, length):
    try:
        vals = tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise InvalidSystem(f"{name}: coefficients must be numbers") from exc
    if len(vals) != length:
        raise InvalidSystem(f"{name}: expected {length} coefficients, got {len(vals)}")
    if not all(math.isfinite(v) for v in vals):
        raise InvalidSystem(f"{name}: coefficients must be finite")
    return vals


@dataclass(frozen=True)
class LienardSystem:
    n: int
    m: int
    A: float
    b: tuple = field(default=())
    a: tuple = field(default=())

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InvalidSystem("n must be a positive integer")
        if isinstance(self.m, bool) or not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise InvalidSystem("m must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m))
        try:
            A = float(self.A)
        except (TypeError, ValueError) as exc:
            raise InvalidSystem("A must be a number") from exc
        if not math.isfinite(A) or A == 0.0:
            raise InvalidSystem("A must be finite and nonzero")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", _finite_tuple("b", self.b, self.n + 1))
        object.__setattr__(self, "a", _finite_tuple("a", self.a, self.m))

    # -- construction ------------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict) -> "LienardSystem":
        if not isinstance(d, dict):
            raise InvalidSystem("system must be a JSON object")
        unknown = set(d) - {"n", "m", "A", "a", "b"}
        if unknown:
            raise InvalidSystem(f"unknown keys: {sorted(unknown)}")
        missing = {"n", "m", "A", "a", "b"} - set(d)
        if missing:
            raise InvalidSystem(f"missing keys: {sorted(missing)}")
        return cls(n=d["n"], m=d["m"], A=d["A"], b=tuple(d["b"]), a=tuple(d["a"]))

    @classmethod
    def from_json(cls, text: str) -> "LienardSystem":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidSystem(f"bad JSON: {exc}") from exc
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "A": self.A, "b": list(self.b), "a": list(self.a)}

    def replace_coefficient(self, which: str, index: int, value: float) -> "LienardSystem":
        coeffs = list(getattr(self, which))
        coeffs[index] = float(value)
        d = self.to_dict()
        d[which] = coeffs
        return LienardSystem.from_dict(d)

    # -- structure ---------------------------------------------------------

    @property
    def case(self) -> CaseTag:
        c = 2 * self.n + 1
        if self.m < c:
            return CaseTag.BELOW
        if self.m == c:
            return CaseTag.CRITICAL
        return CaseTag.ABOVE

    @property
    def symmetric(self) -> bool:
        """All odd b and all even a vanish, so the system is invariant under x -> -x."""
        return all(v == 0.0 for v in self.b[1::2]) and all(v == 0.0 for v in self.a[0::2])

    @cached_property
    def F_coeffs(self) -> np.ndarray:
        return np.array(list(self.b) + [1.0])

    @cached_property
    def G_coeffs(self) -> np.ndarray:
        return -np.array(list(self.a) + [self.A])

    @cached_property
    def dF_coeffs(self) -> np.ndarray:
        return P.polyder(self.F_coeffs)

    @cached_property
    def p_coeffs(self) -> np.ndarray:
        """F'(x)/x, ignoring b_1 (which validation requires to vanish)."""
        return self.dF_coeffs[1:].copy()

    @cached_property
    def q_coeffs(self) -> np.ndarray:
        """-G(x)/x, ignoring a_0."""
        return -self.G_coeffs[1:]

    def F(self, x):
        return P.polyval(x, self.F_coeffs)

    def dF(self, x):
        return P.polyval(x, self.dF_coeffs)

    def G(self, x):
        return P.polyval(x, self.G_coeffs)

    def h(self, x):
        """F'(x)^2 / G(x) with the removable point x = 0 filled in."""
        x = np.asarray(x, dtype=float)
        return -x * P.polyval(x, self.p_coeffs) ** 2 / P.polyval(x, self.q_coeffs)

    def side_polys(self, side):
        """Coefficients of F(s t), p(s t), q(s t) with s = +1 (minus) or -1 (plus)."""
        s = as_side(side).sign
        if s == 1:
            return self.F_coeffs, self.p_coeffs, self.q_coeffs
        return _flip(self.F_coeffs), _flip(self.p_coeffs), _flip(self.q_coeffs)


def _flip(c):
    out = np.array(c, dtype=float)
    out[1::2] = -out[1::2]
    return out


# -- validation ------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple

    def to_dict(self):
        return {"ok": self.ok, "violations": list(self.violations)}


def validate(system: LienardSystem, for_fractal: bool = False) -> ValidationReport:
    """Check the standing assumptions exactly.

    Positivity of F'(x)/x and -G(x)/x is decided by Sturm root counts on the
    exact rational values of the coefficients.
    """
    v = []
    b, a = system.b, system.a
    if b[0] != 0.0:
        v.append("F(0) ≠ 0")
    if b[1] != 0.0:
        v.append("F'(0) ≠ 0")
    if a[0] != 0.0:
        v.append("G(0) ≠ 0")

    # F'(x)/x as an exact polynomial (only meaningful when b_1 = 0)
    n = system.n
    p = [Fraction(k) * Fraction(b[k]) for k in range(2, n + 1)] + [Fraction(n + 1)]
    if b[1] != 0.0 or count_real_roots(p) > 0 or p[0] <= 0:
        v.append("F'(x)/x > 0 fails")
    if p[0] <= 0:
        v.append("F''(0) > 0 fails")

    q = [Fraction(c) for c in a[1:]] + [Fraction(system.A)]
    if a[0] != 0.0 or count_real_roots(q) > 0 or q[0] <= 0:
        v.append("G(x)/x < 0 fails")
    if q[0] <= 0:
        v.append("G'(0) < 0 fails")

    if for_fractal:
        if n % 2 == 0:
            v.append("n must be odd")
        if system.m % 2 == 0:
            v.append("m must be odd")
        if system.A <= 0:
            v.append("A > 0 fails")
        elif system.m != 2 * n + 1 and system.A != 1.0:
            v.append("A = 1 required when m ≠ 2n+1")
    return ValidationReport(ok=not v, violations=tuple(v))


# -- parity profile ---------------------------------------------------------


@dataclass(frozen=True)
class ParityProfile:
    j_b: int | None
    j_a: int | None
    b_o_zero: bool
    a_e_zero: bool
    C: float | None

    def to_dict(self):
        return {
            "j_b": self.j_b,
            "j_a": self.j_a,
            "b_o_zero": self.b_o_zero,
            "a_e_zero": self.a_e_zero,
            "C": self.C,
        }


def parity_profile(system: LienardSystem) -> ParityProfile:
    n, m = system.n, system.m
    j_b = max((j for j in range((n + 1) // 2 + 1) if 2 * j + 1 <= n and system.b[2 * j + 1] != 0.0), default=None)
    j_a = max((j for j in range(m // 2 + 1) if 2 * j <= m - 1 and system.a[2 * j] != 0.0), default=None)
    C = None
    if j_b is not None and j_a is not None and n - 2 * j_b == m - 2 * j_a:
        # exact in the binary values, so C = 0 only when literally constructed
        bb = Fraction(system.b[2 * j_b + 1])
        aa = Fraction(system.a[2 * j_a])
        if system.case is CaseTag.CRITICAL:
            C = float(bb * (n + 2 * j_b + 2) - aa * (n + 1) / Fraction(system.A))
        else:
            C = float(bb * (m - n + 2 * j_b + 1) - aa * (n + 1))
    return ParityProfile(j_b=j_b, j_a=j_a, b_o_zero=j_b is None, a_e_zero=j_a is None, C=C)


def lead_b(system, prof):
    return system.b[2 * prof.j_b + 1]


def lead_a(system, prof):
    return system.a[2 * prof.j_a]


# -- branch inverses ---------------------------------------------------------


def branch_inverse(system: LienardSystem, y: float, side, rtol: float = 1e-12) -> float:
    """omega(y) > 0 (side minus) or alpha(y) < 0 (side plus) with F(x) = y."""
    side = as_side(side)
    y = float(y)
    if not (y >= 0.0 and math.isfinite(y)):
        raise ValueError("y must be a finite nonnegative number")
    if y == 0.0:
        return 0.0
    Fc, _, _ = system.side_polys(side)
    dFc = P.polyder(Fc)

    def f(t):
        return P.polyval(t, Fc) - y

    B = max(1.0, y ** (1.0 / (system.n + 1)))
    for _ in range(2100):
        if f(B) > 0:
            break
        B *= 2.0
    else:
        raise NonConvergence(f"no bracket for F(x) = {y!r}")
    try:
        t = brentq(f, 0.0, B, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    except (RuntimeError, ValueError) as exc:
        raise NonConvergence(str(exc)) from exc
    for _ in range(3):
        d = P.polyval(t, dFc)
        if d <= 0:
            break
        step = f(t) / d
        t_new = t - step
        if not (0 < t_new <= B) or abs(f(t_new)) >= abs(f(t)):
            break
        t = t_new
    scale = P.polyval(t, np.abs(Fc))
    if abs(f(t)) > max(rtol * y, 64 * np.finfo(float).eps * scale):
        raise NonConvergence(f"branch inverse residual {abs(f(t)):.3e} at y={y!r}")
    return side.sign * t
