"""Command-line front end.

Exit codes: 0 success, 1 an inequality or verification failed, 2 usage or
configuration error, 3 numerical failure.  Results are computed in full
before anything is written; a failure while writing removes the files of
the current run.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_config
from .constants import ConstantsError, constants_table
from .eigen import EigenError, cluster
from .fem import AssemblyError
from .geometry import geometric_quantities
from .harness import NULL_FIRST, run_suite, snap_null_first
from .meshing import MeshError, mesh_domain
from .oracles import disk_reference, rectangle_reference
from .problems import Discretization, ProblemError, _solve
from .rellich import RellichError
from .scenarios import SCENARIOS, run_scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3
NUMERICAL_ERRORS = (EigenError, AssemblyError, MeshError, ProblemError, RellichError,
                    LinAlgError, FloatingPointError, ArithmeticError)


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """17 significant digits; empty for missing values."""
    if x is None:
        return ""
    return format(float(x), ".17g")


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def csv_text(header_meta: list, columns: list, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header_meta)
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


class Outputs:
    """Files of one run, written together at the end."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def write(self) -> list[Path]:
        written = []
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
            for name in sorted(self.files):
                path = self.dir / name
                tmp = path.with_name(path.name + ".partial")
                tmp.write_text(self.files[name], encoding="utf-8", newline="")
                os.replace(tmp, path)
                written.append(path)
        except BaseException:
            for path in written:
                path.unlink(missing_ok=True)
            for name in self.files:
                (self.dir / (name + ".partial")).unlink(missing_ok=True)
            raise
        return written


def _meta(cfg: RunConfig) -> dict:
    return {"tool": "speclab", "version": __version__, "config_fingerprint": cfg.fingerprint()}


def _csv_meta(cfg: RunConfig) -> list:
    return ["# speclab", __version__, "config", cfg.fingerprint()]


# ---------------------------------------------------------------------------
# commands


def cmd_spectra(cfg: RunConfig, out: Outputs, say) -> int:
    dom = cfg.domain()
    tables = {p: [] for p in cfg.problems}
    summary = {}
    for level in cfg.levels:
        mesh = mesh_domain(dom, level)
        disc = Discretization(dom, mesh, degree=cfg.quad_degree)
        lv = {"h": mesh.h, "n_dofs": disc.space.n_dofs, "n_triangles": mesh.n_triangles}
        for prob in cfg.problems:
            say(f"level {level}: {prob}")
            res = _solve(prob, disc, cfg.k_max, level, cluster_tol=cfg.cluster_tol,
                         **cfg.solver_opts())
            vals = snap_null_first(prob, res.values)
            cid = np.empty(len(vals), int)
            for j, cl in enumerate(cluster(vals, cfg.cluster_tol)):
                cid[cl.start:cl.stop] = j + 1
            for i, v in enumerate(vals):
                tables[prob].append([level, i + 1, fmt(v), int(cid[i]),
                                     fmt(res.eigen.residual_norms[i])])
            lv[prob] = [float(v) for v in vals]
        summary[str(level)] = lv
    for prob, rows in tables.items():
        out.add(f"spectra_{prob}.csv", csv_text(_csv_meta(cfg), ["level", "index", "value",
                                                                 "cluster_id", "residual"], rows))
    out.add("spectra.json", dumps(dict(_meta(cfg), domain_fingerprint=dom.fingerprint(),
                                       config=cfg.as_dict(), levels=summary)))
    return EXIT_OK


def cmd_check(cfg: RunConfig, out: Outputs, say) -> int:
    rep = run_suite(cfg.suite_config(), progress=say)
    rep.config_fingerprint = cfg.fingerprint()
    out.add("inequalities.json", rep.to_json())
    out.add("inequalities.csv", rep.to_csv())
    s = rep.summary
    print(f"checks: {s['total']}  pass: {s['pass']}  fail: {s['fail']}  skipped: {s['skipped']}")
    for c in rep.checks:
        if c.verdict == "fail":
            print(f"FAIL {c.name}: {c.statement}  lhs={fmt(c.lhs)} rhs={fmt(c.rhs)}")
        elif c.verdict == "skipped":
            print(f"skip {c.name}: {c.reason}")
    return EXIT_FAIL if s["fail"] else EXIT_OK


def cmd_constants(args, out: Optional[Outputs]) -> int:
    k1 = args.kappa1 if args.kappa1 is not None else args.kappa
    k2 = args.kappa2 if args.kappa2 is not None else args.kappa
    table = constants_table(args.n, k1, k2, args.r_max)
    doc = {"tool": "speclab", "version": __version__, "constants": table}
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"
    sys.stdout.write(text)
    if out is not None:
        out.add("constants.json", text)
    return EXIT_OK


def cmd_geometry(cfg: RunConfig, out: Outputs, say) -> int:
    dom = cfg.domain()
    level = cfg.levels[-1]
    geom = geometric_quantities(dom, mesh_domain(dom, level))
    doc = dict(_meta(cfg), domain_fingerprint=dom.fingerprint(), level=level,
               kind=dom.kind, kappa=dom.metric.curvature,
               base_point=[float(v) for v in dom.base_point], geometry=geom.as_dict())
    text = dumps(doc)
    sys.stdout.write(text)
    out.add("geometry.json", text)
    return EXIT_OK


def cmd_rellich(cfg: Optional[RunConfig], args, out: Outputs, say) -> int:
    names = args.scenario or sorted(SCENARIOS)
    for n in names:
        if n not in SCENARIOS:
            raise UsageError(f"unknown scenario {n!r}; choose from {sorted(SCENARIOS)}")
    levels = _parse_levels(args.levels) if args.levels else None
    results = []
    for n in names:
        say(f"scenario {n}")
        r = run_scenario(n, levels)
        results.append(r)
        absolute = r["measure"] == "absolute"
        shown = r["residual"] if absolute else r["relative_residual"]
        print(f"{'ok  ' if r['passed'] else 'FAIL'} {n}: "
              f"{'absolute' if absolute else 'relative'} residuals "
              + " ".join(f"{v:.3e}" for v in shown)
              + (f"  slope {r['slope']:.3f}" if r["slope"] is not None else ""))
    doc = {"tool": "speclab", "version": __version__,
           "config_fingerprint": cfg.fingerprint() if cfg else None,
           "scenarios": results}
    out.add("rellich.json", dumps(doc))
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_FAIL


def _reference(dom, problem, k):
    kind = dom.kind
    if kind == "disk":
        return disk_reference(problem, k, dom.params["radius"])
    if kind == "rectangle":
        return rectangle_reference(problem, k, dom.params["width"], dom.params["height"])
    return None


def richardson_order(h, v) -> list:
    """Observed order from consecutive triples ``(v[i-2], v[i-1], v[i])``."""
    out = [None] * len(v)
    for i in range(2, len(v)):
        d1, d2 = v[i - 1] - v[i - 2], v[i] - v[i - 1]
        if d1 == 0 or d2 == 0 or d1 * d2 < 0:
            continue
        out[i] = math.log(abs(d1 / d2)) / math.log(h[i - 1] / h[i])
    return out


def exact_order(h, err) -> list:
    out = [None] * len(err)
    for i in range(1, len(err)):
        if err[i] and err[i - 1] and err[i] > 0 and err[i - 1] > 0:
            out[i] = math.log(err[i - 1] / err[i]) / math.log(h[i - 1] / h[i])
    return out


def cmd_convergence(cfg: RunConfig, out: Outputs, say) -> int:
    dom = cfg.domain()
    data = {p: [] for p in cfg.problems}
    hs, dofs = [], []
    for level in cfg.levels:
        mesh = mesh_domain(dom, level)
        disc = Discretization(dom, mesh, degree=cfg.quad_degree)
        hs.append(mesh.h)
        dofs.append(disc.space.n_dofs)
        for prob in cfg.problems:
            say(f"level {level}: {prob}")
            res = _solve(prob, disc, cfg.k_max, level, cluster_tol=cfg.cluster_tol,
                         **cfg.solver_opts())
            data[prob].append(snap_null_first(prob, res.values))
    rows, summary = [], {}
    for prob in cfg.problems:
        ref = _reference(dom, prob, cfg.k_max)
        summary[prob] = {}
        for k in range(1, cfg.k_max + 1):
            v = [float(vals[k - 1]) for vals in data[prob]]
            r = float(ref[k - 1]) if ref is not None else None
            err = [abs(x - r) if r is not None else None for x in v]
            order = richardson_order(hs, v)
            eorder = exact_order(hs, err) if r is not None else [None] * len(v)
            for i, level in enumerate(cfg.levels):
                rows.append([prob, k, level, fmt(hs[i]), dofs[i], fmt(v[i]), fmt(order[i]),
                             fmt(r), fmt(err[i]), fmt(eorder[i])])
            summary[prob][str(k)] = {"values": v, "richardson_order": order, "reference": r,
                                     "exact_order": eorder}
    cols = ["problem", "index", "level", "h", "n_dofs", "value", "richardson_order",
            "reference", "error", "exact_order"]
    out.add("convergence.csv", csv_text(_csv_meta(cfg), cols, rows))
    out.add("convergence.json", dumps(dict(_meta(cfg), domain_fingerprint=dom.fingerprint(),
                                           levels=list(cfg.levels), h=hs, n_dofs=dofs,
                                           problems=summary)))
    for prob in cfg.problems:
        k = 2 if prob in NULL_FIRST and cfg.k_max >= 2 else 1
        s = summary[prob][str(k)]
        last = next((o for o in reversed(s["richardson_order"]) if o is not None), None)
        ex = next((o for o in reversed(s["exact_order"]) if o is not None), None)
        print(f"{prob} index {k}: value {s['values'][-1]:.10g}"
              + (f"  richardson order {last:.3f}" if last is not None else "")
              + (f"  order vs reference {ex:.3f}" if ex is not None else ""))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument handling


def _parse_levels(text: str) -> tuple:
    try:
        lv = [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--levels expects integers separated by commas, got {text!r}") from None
    if not lv or any(v < 0 for v in lv) or lv != sorted(set(lv)):
        raise UsageError("--levels must be strictly increasing non-negative integers")
    return tuple(lv)


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else parse_config({"domain": {"preset": "disk"}})
    if getattr(args, "levels", None):
        cfg.levels = _parse_levels(args.levels)
    if getattr(args, "slack", None) is not None:
        if not 0 <= args.slack < 1:
            raise UsageError("--slack must lie in [0, 1)")
        cfg.slack = float(args.slack)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="speclab", description="Finite-element spectral "
                                "laboratory for Laplace and bilaplace eigenvalue inequalities.")
    p.add_argument("--version", action="version", version=f"speclab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, slack=False, levels=True):
        sp.add_argument("--config", metavar="PATH", help="TOML run configuration")
        sp.add_argument("--out", metavar="DIR", help="output directory (default from config)")
        if levels:
            sp.add_argument("--levels", metavar="N", help="mesh levels, e.g. 3 or 2,3,4")
        if slack:
            sp.add_argument("--slack", metavar="X", type=float,
                            help="relative discretization slack per side")
        sp.add_argument("-q", "--quiet", action="store_true", help="no progress messages")

    common(sub.add_parser("spectra", help="eigenvalue tables per problem and level"))
    common(sub.add_parser("check-inequalities", help="run the inequality suite"), slack=True)
    common(sub.add_parser("geometry", help="geometric quantities of the domain"))
    common(sub.add_parser("convergence", help="eigenvalues against h with observed orders"))
    sp = sub.add_parser("verify-rellich", help="built-in Rellich identity scenarios")
    common(sp)
    sp.add_argument("--scenario", action="append", metavar="NAME",
                    help=f"scenario to run (repeatable): {', '.join(sorted(SCENARIOS))}")
    sp = sub.add_parser("constants", help="comparison constants and positivity radii")
    sp.add_argument("--n", type=int, default=2, help="dimension (default 2)")
    sp.add_argument("--kappa", type=float, default=0.0, help="curvature for both bounds")
    sp.add_argument("--kappa1", type=float, help="lower sectional curvature bound")
    sp.add_argument("--kappa2", type=float, help="upper sectional curvature bound")
    sp.add_argument("--r-max", type=float, default=1.0, dest="r_max", help="r_max (default 1)")
    sp.add_argument("--out", metavar="DIR", help="also write constants.json here")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code) if exc.code is not None else EXIT_OK
    quiet = getattr(args, "quiet", False)

    def say(msg):
        if not quiet:
            print(f"[speclab] {msg}", file=sys.stderr)

    try:
        if args.command == "constants":
            out = Outputs(args.out) if args.out else None
            code = cmd_constants(args, out)
        else:
            cfg = _load(args)
            out = Outputs(args.out or cfg.out_dir)
            if args.command == "spectra":
                code = cmd_spectra(cfg, out, say)
            elif args.command == "check-inequalities":
                code = cmd_check(cfg, out, say)
            elif args.command == "geometry":
                code = cmd_geometry(cfg, out, say)
            elif args.command == "convergence":
                code = cmd_convergence(cfg, out, say)
            else:
                code = cmd_rellich(cfg if args.config else None, args, out, say)
        if out is not None:
            for path in out.write():
                say(f"wrote {path}")
        return code
    except (ConfigError, ConstantsError, UsageError) as exc:
        print(f"speclab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERICAL_ERRORS as exc:
        print(f"speclab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"speclab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
