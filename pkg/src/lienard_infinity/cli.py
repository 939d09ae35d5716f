"""Command line front end.

Exit status: 0 ok, 1 invalid input, 2 assumption violation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, charts, fractal
from .classify import DIM_TOL, balance_search, classify, verify
from .errors import AssumptionViolation, InvalidSystem, LienardError, NotDivergent, NumericalFailure
from .integrals import DEFAULT_TOL
from .io import config_line, csv_text, dumps_json, emit, read_points, svg_loglog
from .model import LienardSystem, parity_profile, validate
from .relation import DEFAULT_MAX_ITER, generate_orbit

COMMANDS = ("validate", "classify", "orbit", "dim", "portrait", "verify", "sweep", "balance")
DEFAULT_FORMAT = {"validate": "json", "classify": "json", "orbit": "csv", "dim": "json",
                  "portrait": "json", "verify": "csv", "sweep": "csv", "balance": "json"}
SVG_COMMANDS = ("orbit", "dim", "verify")

EXIT_OK, EXIT_INPUT, EXIT_ASSUMPTION, EXIT_NUMERICAL = 0, 1, 2, 3

SWEEP_HEADER = ["id", "case", "direction", "predicted_dim", "estimate_neighborhood", "estimate_gap_law",
                "gap_exponent", "predicted_gap_exponent", "nondegeneracy_ratio", "max_residual", "orbit_length",
                "status", "dim_tol", "quad_tol", "error"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lienard-infinity", description="Slow relation near infinity and box dimension of its orbits.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        if name == "sweep":
            s.add_argument("--input", required=True, help="JSON-lines file, one system per line (optional 'id' key)")
            s.add_argument("--workers", type=int, default=2)
        elif name == "dim":
            src = s.add_mutually_exclusive_group(required=True)
            src.add_argument("--system", help="path to a system JSON file, or inline JSON")
            src.add_argument("--points", help="CSV of a decreasing sequence")
        else:
            s.add_argument("--system", required=True, help="path to a system JSON file, or inline JSON")
        s.add_argument("--tol", type=float, default=DEFAULT_TOL)
        s.add_argument("--y0", type=float, default=None)
        s.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
        s.add_argument("--r-floor", type=float, default=None)
        s.add_argument("--direction", choices=("auto", "S", "Sinv"), default="auto")
        s.add_argument("--delta-decades", type=float, default=fractal.DELTA_DECADES)
        s.add_argument("--out", default=None)
        s.add_argument("--format", choices=("csv", "json", "svg"), default=None)
        if name == "balance":
            s.add_argument("--coefficient", required=True, help="coefficient to tune, e.g. a1 or b2")
            s.add_argument("--bracket", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    return p


def load_system(src: str) -> LienardSystem:
    text = src
    if not src.lstrip().startswith("{"):
        try:
            with open(src, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InvalidSystem(f"cannot read {src}: {exc.strerror}") from exc
    return LienardSystem.from_json(text)


def resolve_config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("system", "out")}
    cfg["format"] = args.format or DEFAULT_FORMAT[args.command]
    if cfg["tol"] <= 0 or cfg["max_iter"] < 1 or cfg["delta_decades"] <= 0:
        raise InvalidSystem("tol, max-iter and delta-decades must be positive")
    if cfg["y0"] is not None and not cfg["y0"] > 0:
        raise InvalidSystem("y0 must be positive")
    if cfg["r_floor"] is not None and not cfg["r_floor"] > 0:
        raise InvalidSystem("r-floor must be positive")
    if cfg["format"] == "svg" and args.command not in SVG_COMMANDS:
        raise InvalidSystem(f"svg output is available for {', '.join(SVG_COMMANDS)}")
    return cfg


# -- commands -------------------------------------------------------------------------


def _orbit_kwargs(cfg):
    kw = {"y0": cfg["y0"], "direction": cfg["direction"], "max_iter": cfg["max_iter"], "tol": cfg["tol"]}
    if cfg["r_floor"] is not None:
        kw["r_floor"] = cfg["r_floor"]
    return kw


def cmd_validate(system, cfg):
    rep = validate(system)
    feasible, why = charts.canard_at_infinity_feasible(system)
    doc = {"config": cfg, "valid": rep.ok, "violations": list(rep.violations), "case": system.case.value,
           "symmetric": system.symmetric, "parity": parity_profile(system).to_dict(),
           "feasible_at_infinity": feasible, "feasibility_reason": why,
           "fractal_assumptions": validate(system, for_fractal=True).to_dict()}
    if cfg["format"] == "csv":
        text = csv_text(["valid", "case", "symmetric", "feasible_at_infinity", "violations"],
                        [[rep.ok, system.case.value, system.symmetric, feasible, "; ".join(rep.violations)]], cfg)
    else:
        text = dumps_json(doc)
    return text, (EXIT_OK if rep.ok else EXIT_ASSUMPTION)


def cmd_classify(system, cfg):
    pred = classify(system, cfg["tol"])
    doc = {"config": cfg, "summary": pred.summary(), "prediction": pred.to_dict(),
           "tolerances": {"quadrature": cfg["tol"], "zero_test_rtol": 1e-6}}
    if cfg["format"] == "csv":
        d = pred.to_dict()
        return csv_text(["summary", "case", "direction", "predicted_dim", "predicted_dim_exact", "unresolved", "quad_tol"],
                        [[pred.summary(), d["theorem_case"], d["direction"], d["predicted_dim"],
                          d["predicted_dim_exact"], d["unresolved"], cfg["tol"]]], cfg), EXIT_OK
    return dumps_json(doc), EXIT_OK


def _orbit_outputs(orbit, cfg, status):
    if cfg["format"] == "csv":
        return config_line(cfg) + orbit.to_csv()
    if cfg["format"] == "svg":
        r = orbit.r
        return svg_loglog([(f"gap vs {orbit.variable}", r[:-1], r[:-1] - r[1:], "dots")],
                          f"orbit by {orbit.direction.value}, {len(orbit)} terms",
                          f"{orbit.variable}_l", "gap")
    return dumps_json({"config": cfg, "status": status, "orbit": orbit.to_dict(),
                       "sequence": orbit.r, "y": orbit.y, "residual": orbit.residual,
                       "tolerances": {"quadrature": cfg["tol"], "residual": "relative to max(1, |target|)"}})


def cmd_orbit(system, cfg):
    try:
        orbit = generate_orbit(system, **_orbit_kwargs(cfg))
    except NotDivergent as exc:
        if exc.orbit is None:
            raise
        sys.stderr.write(f"error[NotDivergent]: {exc}\n")
        return _orbit_outputs(exc.orbit, cfg, "NotDivergent"), EXIT_NUMERICAL
    return _orbit_outputs(orbit, cfg, "ok"), EXIT_OK


def cmd_dim(system, cfg, points=None):
    source = "points"
    if points is None:
        orbit = generate_orbit(system, **_orbit_kwargs(cfg))
        points, source = orbit.r, "orbit"
    points = np.asarray(points, float)
    nb = fractal.dimension_neighborhood(points, cfg["delta_decades"])
    est = {"neighborhood": nb.to_dict()}
    try:
        est["gap_law"] = fractal.dimension_gap_law(points).to_dict()
    except LienardError as exc:
        est["gap_law"] = {"error": type(exc).__name__, "message": str(exc)}
    if 0 < nb.value < 1:
        est["nondegeneracy"] = fractal.nondegeneracy_diagnostic(points, nb.value, cfg["delta_decades"])
    lo, hi = nb.fit_window
    deltas = np.geomspace(lo, hi, fractal.DELTA_SAMPLES)
    table = fractal.neighborhood_table(points, deltas)
    if cfg["format"] == "csv":
        return csv_text(["delta", "neighborhood_length"], table, cfg), EXIT_OK
    if cfg["format"] == "svg":
        d, L = np.array(table).T
        return svg_loglog([("|U_delta|", d, L, "line")], f"neighbourhood length, dim {nb.value:.4f}",
                          "delta", "length"), EXIT_OK
    return dumps_json({"config": cfg, "source": source, "points": int(points.size), "estimates": est,
                       "table": table}), EXIT_OK


def cmd_portrait(system, cfg):
    entries = charts.singularity_catalog(system)
    if cfg["format"] == "csv":
        rows = [[e.chart, json.dumps(list(map(list, e.location))), " ".join(repr(x) for x in e.eigenvalues),
                 " ".join(repr(x) for x in e.symbolic), e.kind, e.note, charts.EIG_TOL] for e in entries]
        return csv_text(["chart", "location", "eigenvalues", "symbolic", "kind", "note", "eig_tol"], rows, cfg), EXIT_OK
    return dumps_json({"config": cfg, "case": system.case.value, "eigenvalue_tolerance": charts.EIG_TOL,
                       "singularities": entries}), EXIT_OK


def _sweep_row(sid, rep_or_err):
    if isinstance(rep_or_err, str):
        return [sid] + [None] * 10 + ["error", DIM_TOL, None, rep_or_err]
    r = rep_or_err
    p = r["prediction"]
    est = r.get("estimates", {})
    checks = r.get("checks", {})
    orb = r.get("orbit", {})
    return [sid, p["theorem_case"], p["direction"], p["predicted_dim"],
            est.get("neighborhood", {}).get("value"), est.get("gap_law", {}).get("value"),
            est.get("gap_law", {}).get("slope"), p["gap_exponent"],
            checks.get("nondegeneracy", {}).get("ratio"), orb.get("max_residual"), orb.get("length"),
            r["status"], DIM_TOL, r["tolerances"]["quadrature"], None]


def cmd_verify(system, cfg):
    v = verify(system, None, orbit_budget=cfg["max_iter"], y0=cfg["y0"], tol=cfg["tol"], r_floor=cfg["r_floor"])
    if cfg["format"] == "json":
        return dumps_json({"config": cfg, **v.report}), EXIT_OK
    if cfg["format"] == "svg":
        if v.orbit is None:
            raise InvalidSystem(f"nothing to plot: {v.status}")
        r = v.orbit.r
        series = [("observed gap", r[:-1], r[:-1] - r[1:], "dots")]
        beta = v.report["prediction"]["gap_exponent"]
        tail = slice(len(r) // 2, len(r) - 1)
        if beta is not None and r.size > 4:
            c = np.median((r[tail] - r[1:][tail]) / r[tail] ** beta)
            series.append((f"predicted exponent {beta:g}", r[:-1], c * r[:-1] ** beta, "line"))
        return svg_loglog(series, f"{v.report['prediction']['theorem_case']}: {v.status}", "r_l", "gap"), EXIT_OK
    return csv_text(SWEEP_HEADER, [_sweep_row("system", v.report)], cfg), EXIT_OK


def _sweep_one(job):
    sid, doc, cfg = job
    try:
        system = LienardSystem.from_dict(doc)
        v = verify(system, None, orbit_budget=cfg["max_iter"], y0=cfg["y0"], tol=cfg["tol"], r_floor=cfg["r_floor"])
        return sid, v.report
    except LienardError as exc:
        return sid, f"{type(exc).__name__}: {exc}"


def _read_jsonl(path):
    jobs = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InvalidSystem(f"cannot read {path}: {exc.strerror}") from exc
    for i, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InvalidSystem(f"{path}:{i}: bad JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise InvalidSystem(f"{path}:{i}: expected an object")
        sid = str(doc.pop("id", i))
        LienardSystem.from_dict(doc)  # reject malformed lines before any work starts
        jobs.append((sid, doc))
    return jobs


def cmd_sweep(cfg):
    jobs = [(sid, doc, cfg) for sid, doc in _read_jsonl(cfg["input"])]
    workers = max(1, min(cfg["workers"], os.cpu_count() or 1, len(jobs) or 1))
    if workers == 1:
        results = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_one, jobs))
    rows = [_sweep_row(sid, r) for sid, r in results]
    if cfg["format"] == "json":
        return dumps_json({"config": cfg, "results": [{"id": sid, "report": r} for sid, r in results]}), EXIT_OK
    return csv_text(SWEEP_HEADER, rows, cfg), EXIT_OK


def cmd_balance(system, cfg):
    coef = cfg["coefficient"].strip().lower()
    if len(coef) < 2 or coef[0] not in "ab" or not coef[1:].isdigit():
        raise InvalidSystem("coefficient must look like a3 or b2")
    res = balance_search(system, coef[0], int(coef[1:]), tuple(cfg["bracket"]), cfg["tol"])
    doc = {"config": cfg, "tuned_system": res["system"].to_dict(), "value": res["value"], "shift": res["shift"],
           "I_star": res["I_star"], "tolerances": {"balance": res["threshold"], "quadrature": cfg["tol"]}}
    if cfg["format"] == "csv":
        return csv_text(["coefficient", "value", "shift", "I_star", "balance_tol"],
                        [[coef, res["value"], res["shift"], res["I_star"], res["threshold"]]], cfg), EXIT_OK
    return dumps_json(doc), EXIT_OK


def run(args) -> int:
    cfg = resolve_config(args)
    cmd = args.command
    if cmd == "sweep":
        text, code = cmd_sweep(cfg)
    elif cmd == "dim" and args.points is not None:
        text, code = cmd_dim(None, cfg, read_points(args.points))
    else:
        system = load_system(args.system)
        cfg["system"] = system.to_dict()
        handler = {"validate": cmd_validate, "classify": cmd_classify, "orbit": cmd_orbit, "dim": cmd_dim,
                   "portrait": cmd_portrait, "verify": cmd_verify, "balance": cmd_balance}[cmd]
        text, code = handler(system, cfg)
    emit(text, args.out)
    if args.out is not None and cmd == "classify":
        sys.stdout.write(json.loads(text)["summary"] + "\n" if cfg["format"] == "json" else "")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (InvalidSystem, ValueError, OSError) as exc:
        sys.stderr.write(f"error[{type(exc).__name__}]: {exc}\n")
        return EXIT_INPUT
    except AssumptionViolation as exc:
        sys.stderr.write(f"error[{type(exc).__name__}]: {exc}\n")
        return EXIT_ASSUMPTION
    except NumericalFailure as exc:
        sys.stderr.write(f"error[{type(exc).__name__}]: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
