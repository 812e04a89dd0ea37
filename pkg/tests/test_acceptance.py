"""Acceptance criteria, one test each; every test records a single pass/fail line."""
import math

import numpy as np

from speclab.cli import main
from speclab.constants import c0, c1, c2, c3, h_kappa
from speclab.geometry import (blob, disk, ellipse, hyperbolic_disk, polygon, rectangle,
                              spherical_cap)
from speclab.harness import CENTROID, NONPOS_CURV, PLANAR, POS_C1, STAR, SuiteConfig, run_suite
from speclab.meshing import mesh_domain
from speclab.oracles import disk_reference
from speclab.problems import Discretization, _solve
from speclab.rellich import boundary_formula_buckling, boundary_formula_clamped
from speclab.scenarios import run_scenario

from constants_oracle import TUPLES, sampled_constants

# pinned tolerances
SPECTRA_RTOL = 5e-3
MIN_ORDER = 1.8
MAX_DOFS = 30_000
BIHARMONIC_RTOL = 2e-2
RELLICH_RTOL = 1e-8
MIN_SLOPE = 1.8
FORMULA_TOL = {"disk": 2e-2, "square": 3e-2}
SUITE_SLACK = 2e-2
GRID_TOL = 1e-9
RICCATI_TOL = 1e-6
SCALE_TOL = 1e-2

FINE = 5
ETA_LEVEL = 6  # eta_1 converges at first order only


def _order(e_coarse, e_fine, h_coarse, h_fine):
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


def test_criterion_1_closed_form_spectra(acceptance_line):
    d, sq = disk(), rectangle()
    worst = 0.0
    orders = {}
    cases = [  # (label, domain, problem, index, oracle)
        ("disk lambda_1", d, "dirichlet", 1, disk_reference("dirichlet", 1)[0]),
        ("disk lambda_2", d, "dirichlet", 2, disk_reference("dirichlet", 2)[1]),
        ("disk lambda_3", d, "dirichlet", 3, disk_reference("dirichlet", 3)[2]),
        ("disk mu_2", d, "neumann", 2, disk_reference("neumann", 2)[1]),
        ("square lambda_1", sq, "dirichlet", 1, 2 * math.pi**2),
        ("square mu_2", sq, "neumann", 2, math.pi**2),
    ]
    sols = {}
    for dom in (d, sq):
        for lv in (FINE - 1, FINE):
            disc = Discretization(dom, mesh_domain(dom, lv))
            assert disc.space.n_dofs <= MAX_DOFS
            for prob, k in (("dirichlet", 3), ("neumann", 2), ("steklov", 5)):
                if dom is sq and prob == "steklov":
                    continue
                sols[dom.kind, prob, lv] = (_solve(prob, disc, k, lv), disc.mesh.h)
    for label, dom, prob, k, ref in cases:
        (rc, hc), (rf, hf) = sols[dom.kind, prob, FINE - 1], sols[dom.kind, prob, FINE]
        err = abs(rf.value(k) - ref) / ref
        worst = max(worst, err)
        orders[label] = _order(abs(rc.value(k) - ref), abs(rf.value(k) - ref), hc, hf)
    steklov_ref = np.array([0.0, 1.0, 1.0, 2.0, 2.0])
    st = sols["disk", "steklov", FINE][0].values
    st_err = float(np.max(np.abs(st - steklov_ref) / np.maximum(steklov_ref, 1.0)))
    (sc, hc), (sf, hf) = sols["disk", "steklov", FINE - 1], sols["disk", "steklov", FINE]
    orders["disk sigma_2"] = _order(abs(sc.value(2) - 1), abs(sf.value(2) - 1), hc, hf)
    worst = max(worst, st_err)
    min_order = min(orders.values())
    passed = worst <= SPECTRA_RTOL and min_order >= MIN_ORDER
    acceptance_line(1, passed, f"max rel err {worst:.2e} (tol {SPECTRA_RTOL:g}), min order "
                    f"{min_order:.2f} (>= {MIN_ORDER}) at level {FINE}")
    assert passed, orders


def test_criterion_2_biharmonic_oracles(acceptance_line):
    d = disk()
    eta = _solve("bsteklov1", Discretization(d, mesh_domain(d, ETA_LEVEL)), 1, ETA_LEVEL).value(1)
    disc = Discretization(d, mesh_domain(d, FINE))
    lam = _solve("buckling", disc, 1, FINE).value(1)
    gam = _solve("clamped", disc, 1, FINE).value(1)
    errs = {
        "eta_1": abs(eta - 2.0) / 2.0,
        "Lambda_1": abs(lam - disk_reference("buckling", 1)[0]) / disk_reference("buckling", 1)[0],
        "Gamma_1^2": abs(gam - disk_reference("clamped", 1)[0]) / disk_reference("clamped", 1)[0],
    }
    passed = max(errs.values()) <= BIHARMONIC_RTOL
    acceptance_line(2, passed, ", ".join(f"{k} rel err {v:.2e}" for k, v in errs.items())
                    + f" (tol {BIHARMONIC_RTOL:g}; eta at level {ETA_LEVEL})")
    assert passed


def test_criterion_3_rellich_identities(acceptance_line):
    square = [run_scenario(n) for n in ("square-sine", "square-polarized", "square-biharmonic")]
    disk_runs = [run_scenario(n, (1, 2, 3, 4)) for n in ("disk-bubble", "disk-bubble-higher")]
    ok_square = all(r["passed"] and r["tolerance"] <= max(RELLICH_RTOL, 1e-10) for r in square)
    slopes = [r["slope"] for r in disk_runs]
    ok_disk = all(s is not None and s >= MIN_SLOPE for s in slopes)
    worst = max(max(r["relative_residual"] if r["measure"] == "relative" else r["residual"])
                for r in square)
    passed = ok_square and ok_disk
    acceptance_line(3, passed, f"square worst residual {worst:.1e} (<= {RELLICH_RTOL:g}); "
                    f"disk slopes {', '.join(f'{s:.2f}' for s in slopes)} (>= {MIN_SLOPE})")
    assert passed


def test_criterion_4_boundary_formulas(acceptance_line):
    worst = {}
    # the formulas weight by d_nu |x|^2, so the square is centred at the origin
    centred = polygon([(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)])
    for label, dom in (("disk", disk()), ("square", centred)):
        disc = Discretization(dom, mesh_domain(dom, FINE))
        b = boundary_formula_buckling(dom, disc.mesh, _solve("buckling", disc, 1, FINE))[0]
        c = boundary_formula_clamped(dom, disc.mesh, _solve("clamped", disc, 1, FINE))[0]
        worst[label] = max(abs(b.ratio - 1), abs(c.ratio - 1))
    passed = all(worst[k] <= FORMULA_TOL[k] for k in worst)
    acceptance_line(4, passed, "; ".join(f"{k} max |ratio - 1| {v:.2e} (tol {FORMULA_TOL[k]:g})"
                                         for k, v in worst.items()))
    assert passed


CORPUS = {
    "unit disk": disk,
    "unit square": rectangle,
    "2:1 rectangle": lambda: rectangle(2.0, 1.0),
    "ellipse(2,1)": lambda: ellipse(2.0, 1.0),
    "convex blob": blob,
    "hyperbolic disk": hyperbolic_disk,
    "spherical cap": spherical_cap,
}
GATES = (STAR, NONPOS_CURV, PLANAR, CENTROID, POS_C1, "requires c1 = c2", "field conditions",
         "is not positive")


def test_criterion_5_inequality_suite(acceptance_line):
    fails, bad_skips, counts = [], [], []
    for label, make in CORPUS.items():
        rep = run_suite(SuiteConfig(make(), levels=(3, 4), slack=SUITE_SLACK))
        fails += [f"{label}: {c.name}" for c in rep.failures]
        bad_skips += [f"{label}: {c.name} ({c.reason})" for c in rep.checks
                      if c.verdict == "skipped" and not any(g in c.reason for g in GATES)]
        s = rep.summary
        counts.append(f"{label} {s['pass']}/{s['total']}")
        assert not rep.errors, rep.errors
    passed = not fails and not bad_skips
    acceptance_line(5, passed, f"{len(fails)} failures, {len(bad_skips)} ungated skips; passes: "
                    + ", ".join(counts))
    assert passed, fails + bad_skips


def test_criterion_6_constants(acceptance_line):
    from scipy.differentiate import derivative
    grid_err = 0.0
    for n, k1, k2, r in TUPLES:
        g = sampled_constants(n, k1, k2, r)
        got = {"C0": c0(n, k1, r), "C1": c1(n, k1, k2, r), "C2": c2(n, k1, k2, r),
               "C3": c3(n, k1, r)}
        grid_err = max(grid_err, max(abs(got[c] - g[c]) for c in g))
    ric = 0.0
    for n, kappa in ((2, 0.0), (2, -1.0), (2, 1.0), (3, -0.5), (3, 2.0), (5, 4.0)):
        top = 0.95 * math.pi / math.sqrt(kappa) if kappa > 0 else 3.0
        rs = np.linspace(0.05, top, 100)
        f = np.vectorize(lambda x: h_kappa(n, kappa, x))
        dh = derivative(f, rs, initial_step=1e-2).df
        ric = max(ric, float(np.max(np.abs(dh + f(rs) ** 2 / (n - 1) + (n - 1) * kappa))))
    exact = (all(c1(n, 0.0, 0.0, 1.0) == 2.0 and c2(n, 0.0, 0.0, 1.0) == n - 2
                 for n in (2, 3, 4)) and c0(2, 0.0, 1.0) == 2.0)
    passed = grid_err <= GRID_TOL and ric <= RICCATI_TOL and exact
    acceptance_line(6, passed, f"grid max diff {grid_err:.1e} over {len(TUPLES)} tuples "
                    f"(tol {GRID_TOL:g}); Riccati residual {ric:.1e} (tol {RICCATI_TOL:g}); "
                    f"exact values {'reproduced' if exact else 'WRONG'}")
    assert passed


def test_criterion_7_scale_covariance(acceptance_line):
    a = run_suite(SuiteConfig(disk(1.0), levels=(3, 4)))
    b = run_suite(SuiteConfig(disk(2.0), levels=(3, 4)))
    ra, rb = a.by_name(), b.by_name()
    assert ra.keys() == rb.keys()
    worst, compared = 0.0, 0
    for name, ca in ra.items():
        cb = rb[name]
        assert ca.verdict == cb.verdict
        if ca.ratio is None:
            continue
        compared += 1
        scale = max(abs(ca.ratio), abs(cb.ratio))
        if scale > 1e-12:
            worst = max(worst, abs(ca.ratio - cb.ratio) / scale)
    passed = worst <= SCALE_TOL
    acceptance_line(7, passed, f"max relative ratio difference {worst:.2e} over {compared} "
                    f"checks (tol {SCALE_TOL:g})")
    assert passed


def test_criterion_8_determinism(acceptance_line, tmp_path):
    runs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main(["check-inequalities", "--out", str(out), "-q"]) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    passed = runs[0] == runs[1] and set(runs[0]) == {"inequalities.json", "inequalities.csv"}
    acceptance_line(8, passed, "two check-inequalities runs "
                    + ("bitwise identical" if passed else "DIFFER"))
    assert passed
