"""Deterministic JSON, CSV and SVG writers."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import sys
from enum import Enum
from fractions import Fraction

import numpy as np


def fmt(x) -> str:
    """Shortest round-trip text for a float; empty for None."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x + 0.0)
    return str(x)


def jsonable(obj):
    """Plain JSON types; non-finite floats become strings so the output stays strict JSON."""
    if obj is None or isinstance(obj, (str, bool)):
        return obj
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x + 0.0 if math.isfinite(x) else fmt(x)
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, Enum):
        return jsonable(obj.value)
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj):
        return jsonable(dataclasses.asdict(obj))
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def config_line(config: dict) -> str:
    return "# config: " + json.dumps(jsonable(config), sort_keys=True, ensure_ascii=False) + "\n"


def csv_text(header, rows, config: dict | None = None) -> str:
    """CSV with an optional '# config: {...}' first line."""
    buf = io.StringIO()
    if config is not None:
        buf.write(config_line(config))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_points(path: str) -> np.ndarray:
    """First numeric column of a CSV, or the r_l / hr_l column of an orbit file."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise ValueError(f"{path}: no data")
    col = 0
    try:
        float(rows[0][0])
    except ValueError:
        head = rows.pop(0)
        for name in ("r_l", "hr_l", "r", "point"):
            if name in head:
                col = head.index(name)
                break
    try:
        return np.array([float(r[col]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: non-numeric data in column {col}") from exc


# -- SVG --------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _decade_ticks(lo, hi):
    return list(range(math.floor(lo), math.ceil(hi) + 1))


def svg_loglog(series, title: str, xlabel: str, ylabel: str, width: int = 640, height: int = 420) -> str:
    """Static log-log plot. series: [(label, xs, ys, style)] with style 'line' or 'dots'."""
    pts = []
    for label, xs, ys, style in series:
        x = np.asarray(xs, float)
        y = np.asarray(ys, float)
        keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
        pts.append((label, np.log10(x[keep]), np.log10(y[keep]), style))
    allx = np.concatenate([p[1] for p in pts]) if pts else np.array([0.0, 1.0])
    ally = np.concatenate([p[2] for p in pts]) if pts else np.array([0.0, 1.0])
    if allx.size == 0:
        allx, ally = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = math.floor(allx.min()), math.ceil(allx.max())
    y0, y1 = math.floor(ally.min()), math.ceil(ally.max())
    x1, y1 = max(x1, x0 + 1), max(y1, y0 + 1)
    L, R, T, B = 70, 20, 40, 50
    pw, ph = width - L - R, height - T - B

    def sx(v):
        return L + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return T + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{_esc(title)}</text>',
           f'<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    xs_t = _decade_ticks(x0, x1)
    ys_t = _decade_ticks(y0, y1)
    xstep = max(1, len(xs_t) // 10)
    ystep = max(1, len(ys_t) // 10)
    for t in xs_t[::xstep]:
        out.append(f'<line x1="{sx(t):.2f}" y1="{T + ph}" x2="{sx(t):.2f}" y2="{T + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.2f}" y="{T + ph + 16}" text-anchor="middle">1e{t}</text>')
    for t in ys_t[::ystep]:
        out.append(f'<line x1="{L - 4}" y1="{sy(t):.2f}" x2="{L}" y2="{sy(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{L - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">1e{t}</text>')
    out.append(f'<text x="{L + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="14" y="{T + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {T + ph / 2:.1f})">{_esc(ylabel)}</text>')
    for i, (label, lx, ly, style) in enumerate(pts):
        c = _COLORS[i % len(_COLORS)]
        if lx.size:
            if style == "dots":
                step = max(1, lx.size // 2000)
                for a, b in zip(lx[::step], ly[::step]):
                    out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="1.5" fill="{c}"/>')
            else:
                path = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(lx, ly))
                out.append(f'<polyline points="{path}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        out.append(f'<text x="{L + 10}" y="{T + 16 + 14 * i}" fill="{c}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
