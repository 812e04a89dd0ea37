"""Machine check of the eigenvalue inequalities on one domain.

Every check is a pure function of precomputed spectra, geometric
quantities and comparison constants.  Hypotheses are checked before a
check runs; a violated hypothesis yields a skip carrying its statement.

Multiplicities enter through the clustering of the eigensolver.  A
multiplicity is taken from the finest level and from the level before it;
when the two disagree the check is run once per candidate.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import __version__, checks
from .checks import InequalityCheck
from .constants import c0, c1, c2, c3
from .eigen import cluster
from .geometry import Domain, GeometricQuantities, geometric_quantities
from .meshing import mesh_domain
from .problems import Discretization, _solve
from .rellich import grad_rho_field, field_eigenvalue_bounds, position_field

N_DIM = 2

# spectra needed by the checks and the extra values computed beyond k_max
SUITE_PROBLEMS = ("dirichlet", "neumann", "steklov", "bsteklov1", "bsteklov2", "buckling")
EXTRA = {"dirichlet": 3, "neumann": 3, "steklov": 4, "bsteklov1": 1, "bsteklov2": 5,
         "buckling": 0}
# problems whose first eigenvalue is 0 (constants span the kernel)
NULL_FIRST = ("neumann", "steklov", "bsteklov2")
NULL_RTOL = 1e-8


def snap_null_first(problem: str, values) -> np.ndarray:
    """Set a round-off first eigenvalue of a problem with constant kernel to 0."""
    vals = np.array(values, float)
    if problem in NULL_FIRST and len(vals) and (
            len(vals) == 1 and abs(vals[0]) <= NULL_RTOL
            or len(vals) > 1 and abs(vals[0]) <= NULL_RTOL * abs(vals[1])):
        vals[0] = 0.0
    return vals


@dataclass
class SuiteConfig:
    domain: Domain
    levels: tuple = (3, 4)
    k_max: int = 4
    slack: float = checks.DEFAULT_SLACK
    cluster_tol: float = 5e-3
    centroid_tol: float = 1e-8
    quad_degree: int = 4
    solver: dict = field(default_factory=dict)
    # fault injection: {problem: {index: factor}} multiplies computed eigenvalues
    corrupt: dict = field(default_factory=dict)

    def __post_init__(self):
        self.levels = tuple(int(v) for v in self.levels)
        if not self.levels or any(v < 0 for v in self.levels):
            raise ValueError("levels must be a non-empty list of non-negative integers")
        if list(self.levels) != sorted(set(self.levels)):
            raise ValueError("levels must be strictly increasing")
        if self.k_max < 2:
            raise ValueError("k_max must be at least 2")
        if not 0 <= self.slack < 1:
            raise ValueError("slack must lie in [0, 1)")


@dataclass
class Spectra:
    """Eigenvalues per problem at the finest level plus coarse clusters."""

    level: int
    values: dict
    coarse_values: dict
    coarse_level: Optional[int]
    errors: dict
    cluster_tol: float
    results: dict = field(default_factory=dict, repr=False)

    def get(self, problem: str, k: int) -> float:
        return float(self.values[problem][k - 1])

    def has(self, problem: str, k: int) -> bool:
        return problem in self.values and len(self.values[problem]) >= k

    def multiplicity_candidates(self, problem: str, k: int) -> list[int]:
        out = set()
        for vals in (self.values.get(problem), self.coarse_values.get(problem)):
            if vals is None or len(vals) < k:
                continue
            for cl in cluster(np.asarray(vals), self.cluster_tol):
                if cl.start <= k - 1 < cl.stop:
                    out.add(cl.multiplicity)
        return sorted(out)


def compute_spectra(config: SuiteConfig) -> tuple[Spectra, Discretization]:
    levels = config.levels
    fine = levels[-1]
    k = config.k_max
    values, errors, results = {}, {}, {}
    mesh = mesh_domain(config.domain, fine)
    disc = Discretization(config.domain, mesh, degree=config.quad_degree)
    for prob in SUITE_PROBLEMS:
        try:
            res = _solve(prob, disc, k + EXTRA[prob], fine, cluster_tol=config.cluster_tol,
                         **config.solver)
        except Exception as exc:  # a component failure skips the dependent checks
            errors[prob] = f"{type(exc).__name__}: {exc}"
            continue
        vals = snap_null_first(prob, res.values)
        for idx, factor in config.corrupt.get(prob, {}).items():
            vals[int(idx) - 1] *= float(factor)
        values[prob] = vals
        results[prob] = res
    coarse, coarse_level = {}, None
    if len(levels) >= 2:
        coarse_level = levels[-2]
        cdisc = Discretization(config.domain, mesh_domain(config.domain, coarse_level),
                               degree=config.quad_degree)
        for prob in ("dirichlet", "neumann"):
            try:
                r = _solve(prob, cdisc, k + EXTRA[prob], coarse_level,
                           cluster_tol=config.cluster_tol, **config.solver)
                coarse[prob] = np.array(r.values, float)
            except Exception as exc:
                errors[f"{prob}@{coarse_level}"] = f"{type(exc).__name__}: {exc}"
    return Spectra(fine, values, coarse, coarse_level, errors, config.cluster_tol,
                   results), disc


@dataclass(frozen=True)
class Constants:
    n: int
    kappa: float
    r_max: float
    C0: float
    C1: float
    C2: float
    C3: float

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def suite_constants(domain: Domain, geom: GeometricQuantities) -> Constants:
    k = domain.metric.curvature
    r = geom.r_max
    return Constants(N_DIM, k, r, c0(N_DIM, k, r), c1(N_DIM, k, k, r), c2(N_DIM, k, k, r),
                     c3(N_DIM, k, r))


# ---------------------------------------------------------------------------
# checks


class _Ctx:
    def __init__(self, domain, geom, spectra, consts, slack):
        self.domain, self.geom, self.sp, self.cst, self.slack = domain, geom, spectra, consts, slack

    def needs(self, name, statement, relation, *reqs) -> Optional[InequalityCheck]:
        """Skip when a needed eigenvalue is missing (component failure or short spectrum)."""
        for prob, k in reqs:
            if prob in self.sp.errors:
                return checks.skipped(name, statement, f"component failure in {prob}: "
                                      f"{self.sp.errors[prob]}", relation, self.slack)
            if not self.sp.has(prob, k):
                return checks.skipped(name, statement, f"{prob} spectrum has fewer than {k} "
                                      "values", relation, self.slack)
        return None

    def ev(self, name, statement, lhs, rhs, relation="<=", note="", inputs=""):
        return checks.evaluate(name, statement, lhs, rhs, relation, self.slack, inputs, note)

    def skip(self, name, statement, reason, relation="<="):
        return checks.skipped(name, statement, reason, relation, self.slack)


STAR = "requires a domain star-shaped with respect to p"
NONPOS_CURV = "requires kappa_2 <= 0"
PLANAR = "stated for domains in the Euclidean plane"
CENTROID = "requires p to be the centroid of the domain"
POS_C1 = "requires C_1 > 0, i.e. r_max below its positivity radius"


def check_xi_lower(ctx: _Ctx, k_range) -> list[InequalityCheck]:
    """``mu_k sigma_2 <= xi_k`` and ``mu_2 sigma_k <= xi_k``."""
    out = []
    sp = ctx.sp
    for k in k_range:
        st = "mu_k sigma_2 <= xi_k"
        name = f"xi_lower_mu_k_sigma_2/k{k}"
        miss = ctx.needs(name, st, "<=", ("neumann", k), ("steklov", 2), ("bsteklov2", k))
        out.append(miss or ctx.ev(name, st, sp.get("neumann", k) * sp.get("steklov", 2),
                                  sp.get("bsteklov2", k)))
        st = "mu_2 sigma_k <= xi_k"
        name = f"xi_lower_mu_2_sigma_k/k{k}"
        miss = ctx.needs(name, st, "<=", ("neumann", 2), ("steklov", k), ("bsteklov2", k))
        out.append(miss or ctx.ev(name, st, sp.get("neumann", 2) * sp.get("steklov", k),
                                  sp.get("bsteklov2", k)))
    return out


def check_sigma2_lower(ctx: _Ctx) -> list[InequalityCheck]:
    st = "sigma_2 >= h_min mu_2 / (2 r_max mu_2^(1/2) + C_0)"
    name = "sigma2_lower_bound"
    if not ctx.geom.star_shaped:
        return [ctx.skip(name, st, STAR, ">=")]
    miss = ctx.needs(name, st, ">=", ("neumann", 2), ("steklov", 2))
    if miss:
        return [miss]
    g, mu2 = ctx.geom, ctx.sp.get("neumann", 2)
    rhs = g.h_min * mu2 / (2 * g.r_max * math.sqrt(mu2) + ctx.cst.C0)
    return [ctx.ev(name, st, ctx.sp.get("steklov", 2), rhs, ">=",
                   note=f"C_0={ctx.cst.C0:.17g}")]


def check_lambda_eta(ctx: _Ctx, k_range) -> list[InequalityCheck]:
    """Two-sided bound on ``lambda_k`` through ``eta`` and the lower bound on ``eta_1``."""
    out = []
    g, cst, sp = ctx.geom, ctx.cst, ctx.sp
    lo = "C_1 eta_m / h_max <= lambda_k  (m = multiplicity of lambda_k)"
    up = "lambda_k <= (4 r_max^2 eta_k^2 - 2 C_2 h_min eta_k) / h_min^2"
    e1 = "eta_1 >= h_min C_2 / r_max^2"
    if not g.star_shaped:
        out += [ctx.skip(f"lambda_lower_eta/k{k}", lo, STAR) for k in k_range]
        out += [ctx.skip(f"lambda_upper_eta/k{k}", up, STAR) for k in k_range]
        out.append(ctx.skip("eta1_lower_bound", e1, STAR, ">="))
        return out
    for k in k_range:
        cands = sp.multiplicity_candidates("dirichlet", k) if "dirichlet" in sp.values else []
        if not cands:
            name = f"lambda_lower_eta/k{k}"
            out.append(ctx.needs(name, lo, "<=", ("dirichlet", k))
                       or ctx.skip(name, lo, "no multiplicity available"))
        for m in cands:
            name = f"lambda_lower_eta/k{k}/m{m}"
            if cst.C1 <= 0:
                out.append(ctx.skip(name, lo, f"{POS_C1} (C_1 = {cst.C1:.6g})"))
                continue
            miss = ctx.needs(name, lo, "<=", ("dirichlet", k), ("bsteklov1", m))
            out.append(miss or ctx.ev(name, lo, cst.C1 * sp.get("bsteklov1", m) / g.h_max,
                                      sp.get("dirichlet", k),
                                      note=f"C_1={cst.C1:.17g}; m candidates {cands}"))
        name = f"lambda_upper_eta/k{k}"
        miss = ctx.needs(name, up, "<=", ("dirichlet", k), ("bsteklov1", k))
        if miss:
            out.append(miss)
            continue
        eta = sp.get("bsteklov1", k)
        rhs = (4 * g.r_max**2 * eta**2 - 2 * cst.C2 * g.h_min * eta) / g.h_min**2
        out.append(ctx.ev(name, up, sp.get("dirichlet", k), rhs, note=f"C_2={cst.C2:.17g}"))
    miss = ctx.needs("eta1_lower_bound", e1, ">=", ("bsteklov1", 1))
    if miss:
        out.append(miss)
    else:
        rhs = g.h_min * cst.C2 / g.r_max**2
        note = "trivial: C_2 <= 0" if cst.C2 <= 0 else ""
        out.append(ctx.ev("eta1_lower_bound", e1, sp.get("bsteklov1", 1), rhs, ">=", note))
    return out


def _xi_upper(ctx, prefix, statement, const, k_range, const_label):
    out = []
    g, sp = ctx.geom, ctx.sp
    for k in k_range:
        cands = sp.multiplicity_candidates("neumann", k) if "neumann" in sp.values else []
        if not cands:
            name = f"{prefix}/k{k}"
            out.append(ctx.needs(name, statement, "<=", ("neumann", k))
                       or ctx.skip(name, statement, "no multiplicity available"))
        for m in cands:
            name = f"{prefix}/k{k}/m{m}"
            miss = ctx.needs(name, statement, "<=", ("neumann", k), ("bsteklov2", m + 1))
            if miss:
                out.append(miss)
                continue
            mu = sp.get("neumann", k)
            denom = max(const - mu * g.inertia2 / (N_DIM * g.volume), 0.0)
            rhs = g.h_max * mu**2 / denom if denom > 0 else math.inf
            note = f"{const_label}={const:.17g}; m candidates {cands}"
            if denom == 0:
                note += "; trivial: denominator vanishes"
            out.append(ctx.ev(name, statement, sp.get("bsteklov2", m + 1), rhs, note=note))
    return out


def check_xi_upper(ctx: _Ctx, k_range) -> list[InequalityCheck]:
    st = ("xi_{m+1} <= h_max mu_k^2 / ((C_3 - mu_k int d_p^2 / (n vol)) v 0)"
          "  (m = multiplicity of mu_k)")
    reason = None
    if ctx.domain.metric.curvature > 0:
        reason = NONPOS_CURV
    elif not ctx.geom.star_shaped:
        reason = STAR
    if reason:
        return [ctx.skip(f"xi_upper_mu/k{k}", st, reason) for k in k_range]
    return _xi_upper(ctx, "xi_upper_mu", st, ctx.cst.C3, k_range, "C_3")


def _centroid_ok(ctx) -> bool:
    g = ctx.geom
    return g.centroid_residual is not None and (
        g.centroid_residual <= ctx_centroid_tol(ctx) * 2 * g.r_max * g.volume)


def ctx_centroid_tol(ctx) -> float:
    return getattr(ctx, "centroid_tol", 1e-8)


def check_planar(ctx: _Ctx, k_range) -> list[InequalityCheck]:
    """Planar forms with ``F(x) = x - p`` and the classical rows for the plane."""
    out = []
    g, sp = ctx.geom, ctx.sp
    planar = ctx.domain.metric.curvature == 0.0
    gen = "xi_{m+1} <= h_max mu_k^2 / ((2 - mu_k I_2 / (n vol)) v 0)  (m = multiplicity of mu_k)"
    cxi = "xi_{m0+1} <= h_max mu_2^2  (m0 = multiplicity of mu_2; p = centroid)"
    csg = "sigma_{m0+1} <= h_max mu_2  (m0 = multiplicity of mu_2; p = centroid)"
    rows = [
        ("planar_mu2_sigma2_xi2", "mu_2 sigma_2 <= xi_2", False, False),
        ("planar_sigma2_lower", "mu_2 h_min / (1 + mu_2^(1/2) r_max) <= 2 sigma_2", True, False),
        ("planar_eta1_upper", "eta_1 <= lambda_1 h_max / 2", True, False),
        ("planar_lambda1_upper", "lambda_1^(1/2) <= 2 eta_1 r_max / h_min", True, False),
        ("planar_xi2_upper_centroid", "xi_2 <= mu_2^2 h_max", True, True),
    ]
    centroid = _centroid_ok(ctx)

    def gate(star, cen):
        if not planar:
            return PLANAR
        if star and not g.star_shaped:
            return STAR
        if cen and not centroid:
            return CENTROID
        return None

    reason = gate(True, False)
    if reason:
        out += [ctx.skip(f"planar_xi_upper_mu/k{k}", gen, reason) for k in k_range]
    else:
        out += _xi_upper(ctx, "planar_xi_upper_mu", gen, 2.0, k_range, "constant")

    reason = gate(True, True)
    m0s = sp.multiplicity_candidates("neumann", 2) if "neumann" in sp.values else []
    if reason or not m0s:
        why = reason or "no multiplicity available for mu_2"
        out += [ctx.skip("centroid_xi_upper", cxi, why), ctx.skip("centroid_sigma_upper", csg, why)]
    else:
        for m0 in m0s:
            name = f"centroid_xi_upper/m{m0}"
            miss = ctx.needs(name, cxi, "<=", ("neumann", 2), ("bsteklov2", m0 + 1))
            out.append(miss or ctx.ev(name, cxi, sp.get("bsteklov2", m0 + 1),
                                      g.h_max * sp.get("neumann", 2) ** 2,
                                      note=f"m0 candidates {m0s}"))
            name = f"centroid_sigma_upper/m{m0}"
            miss = ctx.needs(name, csg, "<=", ("neumann", 2), ("steklov", m0 + 1))
            out.append(miss or ctx.ev(name, csg, sp.get("steklov", m0 + 1),
                                      g.h_max * sp.get("neumann", 2),
                                      note=f"m0 candidates {m0s}"))

    for name, st, star, cen in rows:
        reason = gate(star, cen)
        rel = "<="
        if reason:
            out.append(ctx.skip(name, st, reason, rel))
            continue
        if name == "planar_mu2_sigma2_xi2":
            miss = ctx.needs(name, st, rel, ("neumann", 2), ("steklov", 2), ("bsteklov2", 2))
            out.append(miss or ctx.ev(name, st, sp.get("neumann", 2) * sp.get("steklov", 2),
                                      sp.get("bsteklov2", 2)))
        elif name == "planar_sigma2_lower":
            miss = ctx.needs(name, st, rel, ("neumann", 2), ("steklov", 2))
            if miss:
                out.append(miss)
                continue
            mu2 = sp.get("neumann", 2)
            out.append(ctx.ev(name, st, mu2 * g.h_min / (1 + math.sqrt(mu2) * g.r_max),
                              2 * sp.get("steklov", 2)))
        elif name == "planar_eta1_upper":
            miss = ctx.needs(name, st, rel, ("bsteklov1", 1), ("dirichlet", 1))
            out.append(miss or ctx.ev(name, st, sp.get("bsteklov1", 1),
                                      0.5 * sp.get("dirichlet", 1) * g.h_max))
        elif name == "planar_lambda1_upper":
            miss = ctx.needs(name, st, rel, ("bsteklov1", 1), ("dirichlet", 1))
            out.append(miss or ctx.ev(name, st, math.sqrt(sp.get("dirichlet", 1)),
                                      2 * sp.get("bsteklov1", 1) * g.r_max / g.h_min))
        else:
            miss = ctx.needs(name, st, rel, ("neumann", 2), ("bsteklov2", 2))
            out.append(miss or ctx.ev(name, st, sp.get("bsteklov2", 2),
                                      sp.get("neumann", 2) ** 2 * g.h_max))
    return out


def check_field_bounds(ctx: _Ctx, spectra: Spectra, k_range) -> list[InequalityCheck]:
    """Dirichlet upper and buckling lower bounds from ``F = grad rho_p``."""
    dom = ctx.domain
    res = spectra.results
    F = position_field(dom.p) if dom.metric.curvature == 0.0 else grad_rho_field(dom)
    if "dirichlet" not in res or "buckling" not in res:
        names = [f"rellich_dirichlet_upper/k{k}" for k in k_range]
        names += [f"rellich_buckling_lower/k{k}" for k in k_range]
        why = "component failure: " + "; ".join(f"{p}: {e}" for p, e in spectra.errors.items())
        return [ctx.skip(n, "bound from the Rellich identity", why) for n in names]
    d = res["dirichlet"]
    out = field_eigenvalue_bounds(dom, d.disc.mesh, F, d, res["buckling"], slack=ctx.slack,
                         indices=max(k_range))
    if "dirichlet" in ctx.sp.values:
        # fault injection and corrupted spectra also reach these checks
        out = [_with_value(c, ctx.sp) for c in out]
    return out


def _with_value(check: InequalityCheck, sp: Spectra) -> InequalityCheck:
    if check.verdict == "skipped":
        return check
    prob = "dirichlet" if check.name.startswith("rellich_dirichlet") else "buckling"
    k = int(check.name.rsplit("/k", 1)[1])
    value = sp.get(prob, k)
    if check.relation == "<=":
        return checks.evaluate(check.name, check.statement, value, check.rhs, "<=",
                               check.discretization_slack, check.inputs, check.note)
    return checks.evaluate(check.name, check.statement, value, check.rhs, ">=",
                           check.discretization_slack, check.inputs, check.note)


# ---------------------------------------------------------------------------
# report


@dataclass
class InequalityReport:
    domain_fingerprint: str
    level: int
    checks: list
    geometry: dict
    constants: dict
    spectra: dict
    config_fingerprint: str = ""
    errors: dict = field(default_factory=dict)
    version: str = __version__

    @property
    def summary(self) -> dict:
        out = {"pass": 0, "fail": 0, "skipped": 0}
        for c in self.checks:
            out[c.verdict] += 1
        out["total"] = len(self.checks)
        return out

    @property
    def failures(self) -> list:
        return [c for c in self.checks if c.verdict == "fail"]

    def by_name(self) -> dict:
        return {c.name: c for c in self.checks}

    def as_dict(self) -> dict:
        return {
            "tool": "speclab",
            "version": self.version,
            "config_fingerprint": self.config_fingerprint,
            "domain_fingerprint": self.domain_fingerprint,
            "level": self.level,
            "summary": self.summary,
            "geometry": self.geometry,
            "constants": self.constants,
            "spectra": self.spectra,
            "errors": self.errors,
            "checks": [c.as_dict() for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["# speclab", self.version, "config", self.config_fingerprint,
                    "domain", self.domain_fingerprint])
        cols = ["name", "statement", "relation", "lhs", "rhs", "slack", "ratio", "verdict",
                "reason", "note"]
        w.writerow(cols)
        for c in self.checks:
            d = c.as_dict()
            w.writerow([fmt_num(d[k]) if k in ("lhs", "rhs", "slack", "ratio") else d[k]
                        for k in cols])
        return buf.getvalue()


def fmt_num(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def config_fingerprint(config: SuiteConfig) -> str:
    doc = {
        "domain": config.domain.fingerprint(),
        "levels": list(config.levels),
        "k_max": config.k_max,
        "slack": config.slack,
        "cluster_tol": config.cluster_tol,
        "centroid_tol": config.centroid_tol,
        "quad_degree": config.quad_degree,
        "solver": {k: config.solver[k] for k in sorted(config.solver)},
        "corrupt": {p: {str(i): float(f) for i, f in sorted(v.items())}
                    for p, v in sorted(config.corrupt.items())},
        "version": __version__,
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def evaluate_checks(domain: Domain, geom: GeometricQuantities, spectra: Spectra,
                    consts: Constants, k_max: int, slack: float = checks.DEFAULT_SLACK,
                    centroid_tol: float = 1e-8) -> list[InequalityCheck]:
    ctx = _Ctx(domain, geom, spectra, consts, slack)
    ctx.centroid_tol = centroid_tol
    ks = range(1, k_max + 1)
    ks2 = range(2, k_max + 1)
    out = []
    out += check_xi_lower(ctx, ks)
    out += check_sigma2_lower(ctx)
    out += check_lambda_eta(ctx, ks)
    out += check_xi_upper(ctx, ks2)
    out += check_planar(ctx, ks2)
    out += check_field_bounds(ctx, spectra, ks)
    names = [c.name for c in out]
    if len(set(names)) != len(names):  # pragma: no cover - programming error
        raise RuntimeError("duplicate check names")
    return sorted(out, key=lambda c: c.name)


def run_suite(config: SuiteConfig, progress: Optional[Callable[[str], None]] = None
              ) -> InequalityReport:
    """Solve the needed spectra once and run every applicable check."""
    say = progress or (lambda s: None)
    say(f"spectra at levels {list(config.levels)}")
    spectra, disc = compute_spectra(config)
    geom = geometric_quantities(config.domain, disc.mesh)
    consts = suite_constants(config.domain, geom)
    say("checks")
    chk = evaluate_checks(config.domain, geom, spectra, consts, config.k_max, config.slack,
                          config.centroid_tol)
    spec_doc = {p: [float(v) for v in vals] for p, vals in sorted(spectra.values.items())}
    return InequalityReport(
        config.domain.fingerprint(), spectra.level, chk, geom.as_dict(), consts.as_dict(),
        spec_doc, config_fingerprint(config), dict(sorted(spectra.errors.items())),
    )
