"""Discrete versions of the seven eigenvalue problems.

Eigenvalues are reported for ``-Delta`` (nonnegative), indexed from 1 and
repeated according to multiplicity.

===========  ==========================================  ==================
problem      quotient                                    space
===========  ==========================================  ==================
dirichlet    int |grad u|^2 / int u^2                    u = 0 on boundary
neumann      int |grad u|^2 / int u^2                    all of V_h
steklov      int |grad u|^2 / int_bd u^2                 all of V_h
bsteklov1    int (Delta u)^2 / int_bd (d_nu u)^2         u = 0 on boundary
bsteklov2    int (Delta u)^2 / int_bd u^2                d_nu u = 0
buckling     int (Delta u)^2 / int |grad u|^2            u = d_nu u = 0
clamped      int (Delta u)^2 / int u^2  (= Gamma^2)      u = d_nu u = 0
===========  ==========================================  ==================

The biharmonic numerators use a mixed variable ``w = Delta_h u`` tested
against the whole space, ``int w phi = -int grad u . grad phi +
int_bd phi g`` for every ``phi``, so the numerator is ``u^T G^T M^{-1} G u``.
The boundary datum ``g`` is the prescribed normal derivative: ``g = 0`` for
bsteklov2, buckling and clamped (``G = -K``; ``d_nu u = 0`` then holds
weakly, as in the Ciarlet-Raviart method) and the discrete trace of
``d_nu u`` for bsteklov1 (``G = -K + N``).  Passing
``normal_constraint="explicit"`` additionally imposes ``d_nu u = 0`` at two
Gauss points per boundary edge; this over-constrains P2 and converges
slowly, so it is kept only for comparison.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import fem
from .eigen import EigenResult, MixedForm, solve_smallest
from .geometry import Domain
from .meshing import Mesh

PROBLEMS = ("dirichlet", "neumann", "steklov", "bsteklov1", "bsteklov2", "buckling", "clamped")

SYMBOLS = {
    "dirichlet": "lambda", "neumann": "mu", "steklov": "sigma", "bsteklov1": "eta",
    "bsteklov2": "xi", "buckling": "Lambda", "clamped": "Gamma^2",
}

# dilation exponent: value(t * Omega) = t**(-power) * value(Omega)
SCALING_POWER = {
    "dirichlet": 2, "neumann": 2, "steklov": 1, "bsteklov1": 1, "bsteklov2": 3,
    "buckling": 2, "clamped": 4,
}

# problems whose first eigenvalue is zero (constants)
ZERO_FIRST = ("neumann", "steklov", "bsteklov2")


class ProblemError(ValueError):
    pass


class Discretization:
    """Assembled forms of one P1/P2 space on one mesh, computed lazily."""

    def __init__(self, domain: Domain, mesh: Mesh, order: int = 2, degree: int = 4):
        self.domain = domain
        self.mesh = mesh
        self.metric = domain.metric
        self.space = fem.FeSpace(mesh, order)
        self.degree = degree

    @cached_property
    def K(self):
        return fem.assemble_stiffness(self.space, self.metric, self.degree)

    @cached_property
    def M(self):
        deg = self.degree if self.metric.curvature == 0 else max(self.degree, 7)
        return fem.assemble_mass(self.space, self.metric, deg)

    @cached_property
    def B(self):
        return fem.assemble_boundary_mass(self.space, self.metric)

    @cached_property
    def N(self):
        return fem.assemble_flux(self.space)

    @cached_property
    def G(self):
        return fem.discrete_laplacian_operator(self.space, self.K, self.N)

    @cached_property
    def G0(self):
        return (-self.K).tocsr()

    @cached_property
    def Nnu(self):
        return fem.assemble_normal_gram(self.space, self.metric)

    @cached_property
    def C(self):
        return fem.normal_constraint_matrix(self.space)

    @property
    def interior(self):
        return self.space.interior_dofs

    @cached_property
    def _mass_lu(self):
        return MixedForm(self.G, self.M).lu

    def laplacian(self, u: np.ndarray, with_flux: bool = False) -> np.ndarray:
        """Mixed-variable Laplacian: ``M w = -K u`` (or ``(-K + N) u``)."""
        G = self.G if with_flux else self.G0
        return self._mass_lu.solve(G @ np.asarray(u, float))

    def fingerprint(self) -> str:
        return self.domain.fingerprint()


@dataclass
class SpectralResult:
    problem: str
    eigen: EigenResult
    disc: Discretization
    level: Optional[int] = None

    @property
    def space(self) -> fem.FeSpace:
        return self.disc.space

    @property
    def values(self) -> np.ndarray:
        return self.eigen.values

    @property
    def domain_fingerprint(self) -> str:
        return self.disc.fingerprint()

    def value(self, k: int) -> float:
        """1-based eigenvalue."""
        if not 1 <= k <= len(self.values):
            raise IndexError(f"{self.problem} spectrum has {len(self.values)} values, asked {k}")
        return float(self.values[k - 1])

    def vector(self, k: int) -> np.ndarray:
        return self.eigen.vectors[:, k - 1]

    def multiplicity(self, k: int) -> int:
        return self.eigen.multiplicity(k)


def _solve(problem, disc: Discretization, k: int, level=None,
           normal_constraint: str = "natural", **opts) -> SpectralResult:
    if k < 1:
        raise ProblemError("k must be at least 1")
    if normal_constraint not in ("natural", "explicit"):
        raise ProblemError("normal_constraint must be 'natural' or 'explicit'")
    d = disc
    if problem in ("bsteklov1", "bsteklov2", "buckling", "clamped") and d.space.order != 2:
        raise ProblemError("biharmonic problems need the P2 space")
    C = d.C if normal_constraint == "explicit" else None
    if problem == "dirichlet":
        eig = solve_smallest(d.K, d.M, k, dofs=d.interior, **opts)
    elif problem == "neumann":
        eig = solve_smallest(d.K, d.M, k, **opts)
    elif problem == "steklov":
        eig = solve_smallest(d.K, d.B, k, **opts)
    elif problem == "bsteklov1":
        if d.Nnu.nnz == 0:
            raise ProblemError("normal-trace Gram matrix is zero")
        eig = solve_smallest(MixedForm(d.G, d.M), d.Nnu, k, dofs=d.interior, **opts)
    elif problem == "bsteklov2":
        eig = solve_smallest(MixedForm(d.G0, d.M), d.B, k, constraint=C, **opts)
    elif problem in ("buckling", "clamped"):
        rhs = d.K if problem == "buckling" else d.M
        eig = solve_smallest(MixedForm(d.G0, d.M), rhs, k, dofs=d.interior, constraint=C,
                             **opts)
    else:
        raise ProblemError(f"unknown problem {problem!r}; expected one of {PROBLEMS}")
    return SpectralResult(problem, eig, disc, level)


def solve(problem: str, domain: Domain, mesh: Mesh, k: int, *, order: int = 2,
          disc: Optional[Discretization] = None, level: Optional[int] = None,
          **opts) -> SpectralResult:
    disc = disc if disc is not None else Discretization(domain, mesh, order)
    return _solve(problem, disc, k, level, **opts)


def dirichlet_spectrum(domain, mesh, k, **kw):
    return solve("dirichlet", domain, mesh, k, **kw)


def neumann_spectrum(domain, mesh, k, **kw):
    return solve("neumann", domain, mesh, k, **kw)


def steklov_spectrum(domain, mesh, k, **kw):
    return solve("steklov", domain, mesh, k, **kw)


def bsteklov1_spectrum(domain, mesh, k, **kw):
    return solve("bsteklov1", domain, mesh, k, **kw)


def bsteklov2_spectrum(domain, mesh, k, **kw):
    return solve("bsteklov2", domain, mesh, k, **kw)


def buckling_spectrum(domain, mesh, k, **kw):
    return solve("buckling", domain, mesh, k, **kw)


def clamped_spectrum(domain, mesh, k, **kw):
    """Clamped plate; values are the quotients ``Gamma^2``."""
    return solve("clamped", domain, mesh, k, **kw)
