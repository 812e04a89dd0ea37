"""Built-in Rellich verification scenarios.

Each scenario fixes ``(w, F, lambda)`` on a domain and a pass criterion:

``tolerance``
    residual (relative, or absolute when every term vanishes) at every
    level below a fixed bound, for analytic integrands that the quadrature
    integrates exactly or to round-off;
``convergence``
    least-squares slope of ``log2(residual)`` against the level at least
    ``min_slope``; residuals that vanish to round-off count as exact;
``trend``
    relative residual strictly decreasing with the level (discrete fields).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import disk, hyperbolic_disk, rectangle, spherical_cap
from .meshing import mesh_domain
from .problems import Discretization, _solve
from .rellich import (FemField, grad_rho_field, polarized_residual, polynomial_field,
                      position_field, rellich2_residual, rellich_residual, trig_field)

EXACT_FLOOR = 1e-12


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    identity: str
    criterion: str  # tolerance | convergence | trend
    run: Callable = field(repr=False, compare=False)
    tolerance: float = 0.0
    min_slope: float = 0.0
    default_levels: tuple = (1, 2, 3, 4)
    measure: str = "relative"  # residual compared with the tolerance


def _square_sine(level):
    sq = rectangle()
    return rellich_residual(sq, mesh_domain(sq, level), trig_field(),
                            position_field((0.5, 0.5)), 2 * math.pi**2)


def _square_polarized(level):
    sq = rectangle()
    return polarized_residual(sq, mesh_domain(sq, level), polynomial_field("x", {(1, 0): 1.0}),
                              polynomial_field("y", {(0, 1): 1.0}), position_field())


def _square_biharmonic(level):
    sq = rectangle()
    w = polynomial_field("x4-3x2y2", {(4, 0): 1.0, (2, 2): -3.0})
    return rellich2_residual(sq, mesh_domain(sq, level), w, position_field((0.5, 0.5)), 0.0)


def _disk_harmonic(level):
    d = disk()
    w = polynomial_field("x2-y2", {(2, 0): 1.0, (0, 2): -1.0})
    return rellich_residual(d, mesh_domain(d, level), w, position_field(), 0.0)


BUBBLE = {(0, 0): 1.0, (2, 0): -1.0, (0, 2): -1.0}


def _disk_bubble(level):
    d = disk()
    return rellich_residual(d, mesh_domain(d, level), polynomial_field("bubble", BUBBLE),
                            position_field((0.2, 0.1)), 0.7, boundary="exact")


def _disk_bubble2(level):
    d = disk()
    return rellich2_residual(d, mesh_domain(d, level), polynomial_field("bubble", BUBBLE),
                             position_field((0.2, 0.1)), 0.7, boundary="exact")


CUBIC = {(2, 0): 1.0, (1, 1): 0.5, (0, 3): 0.3, (0, 0): 0.2}


def _curved(domain_fn, fn):
    def run(level):
        dom = domain_fn()
        return fn(dom, mesh_domain(dom, level), polynomial_field("cubic", CUBIC),
                  grad_rho_field(dom), 1.3, boundary="mesh")
    return run


def _fem(problem, fn):
    def run(level):
        d = disk()
        disc = Discretization(d, mesh_domain(d, level))
        res = _solve(problem, disc, 1, level)
        return fn(d, disc.mesh, FemField(disc, res.vector(1)), position_field(), res.value(1))
    return run


SCENARIOS = {s.name: s for s in (
    Scenario("square-sine", "Dirichlet eigenfunction sin(pi x) sin(pi y), F = x - (1/2, 1/2)",
             "rellich", "tolerance", _square_sine, tolerance=1e-8, default_levels=(2,)),
    Scenario("square-polarized", "w = x, v = y, F = x on the unit square", "polarized",
             "tolerance", _square_polarized, tolerance=1e-10, default_levels=(2,),
             measure="absolute"),
    Scenario("square-biharmonic", "w = x^4 - 3 x^2 y^2, F = x - (1/2, 1/2)", "rellich2",
             "tolerance", _square_biharmonic, tolerance=1e-9, default_levels=(2,)),
    Scenario("disk-harmonic", "w = x^2 - y^2, F = x on the unit disk", "rellich",
             "convergence", _disk_harmonic, min_slope=1.8),
    Scenario("disk-bubble", "w = 1 - |x|^2, lambda = 0.7, F = x - (0.2, 0.1)", "rellich",
             "convergence", _disk_bubble, min_slope=1.8),
    Scenario("disk-bubble-higher", "w = 1 - |x|^2, lambda = 0.7, F = x - (0.2, 0.1)",
             "rellich2", "convergence", _disk_bubble2, min_slope=1.8),
    Scenario("hyperbolic-grad-rho", "cubic w, F = grad rho_p, kappa = -1, radius 1", "rellich",
             "tolerance", _curved(hyperbolic_disk, rellich_residual), tolerance=1e-8,
             default_levels=(2,)),
    Scenario("spherical-grad-rho", "cubic w, F = grad rho_p, kappa = 1, radius 0.5",
             "rellich", "tolerance", _curved(spherical_cap, rellich_residual), tolerance=1e-8,
             default_levels=(2,)),
    Scenario("disk-dirichlet-fem", "first Dirichlet FEM eigenfunction, F = x", "rellich",
             "trend", _fem("dirichlet", rellich_residual)),
    Scenario("disk-buckling-fem", "first buckling FEM eigenfunction, F = x", "rellich2",
             "trend", _fem("buckling", rellich2_residual)),
)}


def fit_slope(levels, residuals) -> float:
    """Least-squares decay rate of ``residual ~ 2^(-slope level)``."""
    lv = np.asarray(levels, float)
    r = np.asarray(residuals, float)
    if len(lv) < 2 or np.any(r <= 0):
        return math.nan
    return float(-np.polyfit(lv, np.log2(r), 1)[0])


def run_scenario(name: str, levels=None) -> dict:
    sc = SCENARIOS[name]
    levels = tuple(levels) if levels else sc.default_levels
    results = [sc.run(lv) for lv in levels]
    rel = [r.relative_residual for r in results]
    absres = [r.residual for r in results]
    slope = math.nan
    note = ""
    if sc.criterion == "tolerance":
        measured = rel if sc.measure == "relative" else absres
        passed = all(v <= sc.tolerance for v in measured)
    elif sc.criterion == "convergence":
        if all(v <= EXACT_FLOOR for v in rel):
            passed, note = True, "residual vanishes to round-off at every level"
        elif len(levels) < 2:
            passed, note = False, "convergence needs at least two levels"
        else:
            slope = fit_slope(levels, absres)
            passed = slope >= sc.min_slope
    else:
        if len(levels) < 2:
            passed, note = False, "trend needs at least two levels"
        else:
            passed = all(b < a for a, b in zip(rel, rel[1:]))
    return {
        "name": sc.name,
        "description": sc.description,
        "identity": sc.identity,
        "criterion": sc.criterion,
        "tolerance": sc.tolerance if sc.criterion == "tolerance" else None,
        "measure": sc.measure if sc.criterion == "tolerance" else None,
        "min_slope": sc.min_slope if sc.criterion == "convergence" else None,
        "levels": list(levels),
        "residual": absres,
        "relative_residual": rel,
        "slope": None if math.isnan(slope) else slope,
        "passed": bool(passed),
        "note": note,
        "terms": results[-1].rhs_terms,
        "lhs": results[-1].lhs,
        "boundary_mode": results[-1].boundary_mode,
    }
