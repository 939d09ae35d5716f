"""Box dimension of sequences accumulating at 0.

Two estimators: the slope of log|U_delta| against log delta, and the gap
law r_l - r_{l+1} ~ r_l^beta read as dim = 1 - 1/beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotAsymptotic, WindowTooNarrow

DROP_FRACTION = 0.2
DELTA_DECADES = 3.0
DELTA_SAMPLES = 41
MIN_TRANSITIONS = 30
MIN_DECADES = 0.5
NONDEGENERACY_THRESHOLD = 1e2
GAP_RESIDUAL_LIMIT = 0.1
GAP_RESOLUTION = 1e3 * np.finfo(float).eps


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    method: str  # NeighborhoodFit | GapLawFit
    fit_window: tuple
    stderr: float
    slope: float
    points_used: int
    nondegeneracy: dict | None = None
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "value": self.value,
            "method": self.method,
            "fit_window": list(self.fit_window),
            "stderr": self.stderr,
            "slope": self.slope,
            "points_used": self.points_used,
            "nondegeneracy": self.nondegeneracy,
            "notes": self.notes,
        }


def _as_decreasing(points):
    p = np.asarray(points, dtype=float).ravel()
    if p.size < 2:
        raise ValueError("need at least two points")
    if not np.all(np.diff(p) < 0):
        raise ValueError("points must be strictly decreasing")
    return p


# -- exact neighbourhood lengths ---------------------------------------------------


class _Neighborhood:
    """|U_delta| for many delta at once: 2 delta + sum of min(gap, 2 delta)."""

    def __init__(self, points, closed_below=None):
        p = np.sort(np.asarray(points, dtype=float))
        if closed_below is not None:
            # everything in [0, closed_below] counts as covered
            p = p[p >= closed_below]
            self.solid = float(closed_below)
        else:
            self.solid = 0.0
        self.gaps = np.sort(np.diff(p))
        self.csum = np.concatenate([[0.0], np.cumsum(self.gaps)])

    def __call__(self, delta):
        d2 = 2.0 * np.asarray(delta, dtype=float)
        i = np.searchsorted(self.gaps, d2, side="left")
        return self.solid + d2 + self.csum[i] + d2 * (self.gaps.size - i)


def neighborhood_length(points, delta: float) -> float:
    """Lebesgue measure of the union of [p - delta, p + delta] over the points."""
    p = np.sort(np.asarray(points, dtype=float).ravel())
    if p.size == 0:
        return 0.0
    if delta <= 0:
        raise ValueError("delta must be positive")
    g = np.diff(p)
    return math.fsum(np.minimum(g, 2.0 * delta)) + 2.0 * delta


def union_length_bruteforce(points, delta: float) -> float:
    """Sort-and-sweep over the explicit intervals; used as an independent check."""
    iv = sorted((p - delta, p + delta) for p in np.asarray(points, dtype=float).ravel())
    total = 0.0
    cur_lo, cur_hi = iv[0]
    for lo, hi in iv[1:]:
        if lo > cur_hi:
            total += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    return total + (cur_hi - cur_lo)


# -- fitting helpers ------------------------------------------------------------------


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(x.size - 2, 1)
    s2 = float(resid @ resid) / dof
    sxx = float(np.sum((x - x.mean()) ** 2))
    se = math.sqrt(s2 / sxx) if sxx > 0 else math.inf
    return float(coef[0]), float(coef[1]), se, resid


def _drift(x, y):
    """Half the change in slope between the two halves of the window."""
    h = x.size // 2
    if h < 3:
        return 0.0
    s1 = _linfit(x[:h], y[:h])[0]
    s2 = _linfit(x[h:], y[h:])[0]
    return 0.5 * abs(s1 - s2)


def _tail_start(p, drop):
    return int(math.floor(drop * p.size))


def _resolved_end(p):
    """Index past which gaps sink below the relative resolution of the values."""
    g = p[:-1] - p[1:]
    ok = g > GAP_RESOLUTION * p[:-1]
    bad = np.nonzero(~ok)[0]
    return p.size if bad.size == 0 else int(bad[0]) + 1


def delta_window(points, delta_decades=DELTA_DECADES, drop=DROP_FRACTION):
    """(delta_lo, delta_hi, transitions) used by the neighbourhood fit.

    delta_hi is half the gap where the fit starts (after the transient),
    delta_lo is half the last resolved gap (the tail closure is exact from
    there on) or delta_hi / 10^decades, whichever is larger; the window is
    widened a decade at a time while it holds fewer than 30 gaps.
    """
    p = _as_decreasing(points)
    end = _resolved_end(p)
    p = p[:end]
    g = p[:-1] - p[1:]
    k = _tail_start(p, drop)
    if g.size - k < 2:
        raise WindowTooNarrow("too few points after the transient")
    hi = 0.5 * float(np.max(g[k:]))
    lo = 0.5 * float(np.max(g[-max(1, g.size // 100):]))
    floor = lo
    lo = max(floor, hi * 10.0 ** -delta_decades)

    def count(lo):
        return int(np.count_nonzero((g >= 2 * lo) & (g <= 2 * hi)))

    # sparse (e.g. geometric) sequences: widen downwards until enough gaps fall inside
    while count(lo) < MIN_TRANSITIONS and lo > floor:
        lo = max(floor, lo / 10.0)
    trans = count(lo)
    return lo, hi, trans, p


def dimension_neighborhood(points, delta_decades: float = DELTA_DECADES, tail_closure: bool = True,
                           drop: float = DROP_FRACTION) -> DimensionEstimate:
    """1 - slope of log|U_delta| against log delta, with 0 appended.

    With tail_closure the interval between 0 and the last point is counted
    as covered, which is exact once 2 delta exceeds every remaining gap.
    """
    lo, hi, trans, p = delta_window(points, delta_decades, drop)
    decades = math.log10(hi / lo) if lo > 0 else 0.0
    if decades < MIN_DECADES or trans < MIN_TRANSITIONS:
        raise WindowTooNarrow(f"delta window spans {decades:.2f} decades with {trans} transitions")
    nb = _Neighborhood(np.append(p, 0.0), closed_below=float(p[-1]) if tail_closure else None)
    deltas = np.geomspace(lo, hi, DELTA_SAMPLES)
    L = nb(deltas)
    x, y = np.log(deltas), np.log(L)
    slope, _, se, _ = _linfit(x, y)
    err = se + _drift(x, y)
    return DimensionEstimate(
        value=float(min(1.0, max(0.0, 1.0 - slope))),
        method="NeighborhoodFit",
        fit_window=(lo, hi),
        stderr=float(err),
        slope=slope,
        points_used=int(p.size),
        notes={"decades": decades, "transitions": trans, "tail_closure": tail_closure},
    )


def dimension_gap_law(points, drop: float = DROP_FRACTION) -> DimensionEstimate:
    """beta from log(r_l - r_{l+1}) against log r_l; dim = 1 - 1/beta, 0 for geometric decay."""
    p = _as_decreasing(points)
    p = p[: _resolved_end(p)]
    k = _tail_start(p, drop)
    r = p[k:-1]
    g = p[k:-1] - p[k + 1:]
    if r.size < 5:
        raise NotAsymptotic("too few resolved gaps after the transient")
    x, y = np.log(r), np.log(g)
    beta, _, se, resid = _linfit(x, y)
    spread = float(np.max(np.abs(resid)))
    if spread > GAP_RESIDUAL_LIMIT:
        raise NotAsymptotic(f"gap law residuals reach {spread:.3f} in log scale")
    err_beta = se + _drift(x, y)
    if beta <= 1.0:
        value, err = 0.0, err_beta
    else:
        value, err = 1.0 - 1.0 / beta, err_beta / beta ** 2
    return DimensionEstimate(
        value=float(value),
        method="GapLawFit",
        fit_window=(int(k), int(p.size - 1)),
        stderr=float(err),
        slope=beta,
        points_used=int(r.size),
        notes={"max_log_residual": spread},
    )


def nondegeneracy_diagnostic(points, d: float, delta_decades: float = DELTA_DECADES,
                             tail_closure: bool = True, drop: float = DROP_FRACTION) -> dict:
    """Bounds of |U_delta| / delta^(1-d) over the fit window; ratio = upper / lower."""
    if not 0.0 <= d < 1.0:
        raise ValueError("d must lie in [0, 1)")
    lo, hi, trans, p = delta_window(points, delta_decades, drop)
    nb = _Neighborhood(np.append(p, 0.0), closed_below=float(p[-1]) if tail_closure else None)
    deltas = np.geomspace(lo, hi, DELTA_SAMPLES)
    c = nb(deltas) / deltas ** (1.0 - d)
    trend = _linfit(np.log(deltas), np.log(c))[0]
    ratio = float(np.max(c) / np.min(c))
    return {
        "d": float(d),
        "content_lower": float(np.min(c)),
        "content_upper": float(np.max(c)),
        "ratio": ratio,
        "trend": float(trend),
        "window": [lo, hi],
        "threshold": NONDEGENERACY_THRESHOLD,
        "verdict": "nondegenerate (empirical)" if ratio <= NONDEGENERACY_THRESHOLD else "degenerate (empirical)",
    }


def neighborhood_table(points, deltas, tail_closure=True):
    """Rows (delta, |U_delta|) for export."""
    p = _as_decreasing(points)
    nb = _Neighborhood(np.append(p, 0.0), closed_below=float(p[-1]) if tail_closure else None)
    d = np.asarray(deltas, dtype=float)
    return list(zip(d.tolist(), nb(d).tolist()))


def power_recursion(r0: float, c: float, beta: float, count: int) -> np.ndarray:
    """r_{l+1} = r_l - c r_l^beta, the calibration family."""
    out = np.empty(count)
    r = float(r0)
    for i in range(count):
        out[i] = r
        r = r - c * r ** beta
    return out
