"""Numerical verification of Rellich-type integral identities.

All quantities are evaluated in the conformal chart, ``g = c^2 (dx^2 + dy^2)``
with ``phi = log c``.  For chart partials ``dw`` and chart vector components
``F``::

    <F, grad w>_g = F . dw            |grad w|_g^2 = c^-2 |dw|^2
    <F, nu>_g     = c F . nu_e        d_nu w       = c^-1 dw . nu_e
    dv_g = c^2 dx                     ds_g         = c ds
    Delta_g w = c^-2 Delta_0 w

The covariant derivative ``DF`` is represented by its matrix ``J`` in the
orthonormal frame ``c^-1 d_i``::

    J_jk = d_j F^k + delta_jk (F . dphi) + F^k d_j phi - F^j d_k phi

so that ``DF(grad w, grad v) = c^-2 dw^T J dv`` and ``div F = tr J``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import checks
from .constants import rh_kappa
from .fem import FeSpace, evaluate, normal_derivative
from .geometry import EUCLIDEAN, Domain, MetricModel, Segment, boundary_samples
from .meshing import Mesh
from .quadrature import edge_rule, triangle_rule


class RellichError(ValueError):
    pass


class UnsupportedMetric(RellichError):
    pass


class PreconditionError(RellichError):
    pass


# ---------------------------------------------------------------------------
# vector fields


def _christoffel(J0, F, dphi):
    """Orthonormal-frame covariant derivative from the chart Jacobian."""
    eye = np.eye(2)
    fdp = np.sum(F * dphi, axis=-1)
    return (J0 + fdp[..., None, None] * eye
            + dphi[..., :, None] * F[..., None, :]
            - F[..., :, None] * dphi[..., None, :])


@dataclass(frozen=True)
class VectorFieldSpec:
    """Tangent field given in chart components.

    ``jacobian(x)[..., j, k] = d_j F^k`` (chart).  ``covariant`` may supply
    ``J`` directly; otherwise it is built from ``jacobian`` or, failing
    that, from central differences of ``F``.
    """

    name: str
    F: Callable
    metric: MetricModel = EUCLIDEAN
    jacobian: Optional[Callable] = None
    covariant: Optional[Callable] = None
    divergence: Optional[Callable] = None
    fd_step: float = 1e-5

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.F(np.asarray(x, float)), float)

    def fd_jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        h = self.fd_step
        cols = []
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            cols.append((self(x + e) - self(x - e)) / (2 * h))
        return np.stack(cols, axis=-2)  # [..., j, k]

    def _from_jacobian(self, x, J0):
        F = self(x)
        return _christoffel(J0, F, self.metric.grad_log_factor(x))

    def DF(self, x, fd: bool = False) -> np.ndarray:
        x = np.asarray(x, float)
        if fd:
            return self._from_jacobian(x, self.fd_jacobian(x))
        if self.covariant is not None:
            return np.asarray(self.covariant(x), float)
        J0 = self.jacobian(x) if self.jacobian is not None else self.fd_jacobian(x)
        return self._from_jacobian(x, np.asarray(J0, float))

    def div(self, x) -> np.ndarray:
        if self.divergence is not None:
            return np.asarray(self.divergence(np.asarray(x, float)), float)
        return np.trace(self.DF(x), axis1=-2, axis2=-1)

    def consistency(self, x) -> tuple[float, float]:
        """``(max |DF - DF_fd|, max |tr DF - div F|)`` at probe points."""
        J = self.DF(x)
        d1 = float(np.max(np.abs(J - self.DF(x, fd=True))))
        d2 = float(np.max(np.abs(np.trace(J, axis1=-2, axis2=-1) - self.div(x))))
        return d1, d2


def position_field(center=(0.0, 0.0)) -> VectorFieldSpec:
    """``F(x) = x - center`` in the Euclidean plane."""
    c = np.asarray(center, float)
    return VectorFieldSpec(
        "position",
        lambda x: x - c,
        EUCLIDEAN,
        jacobian=lambda x: np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)),
        divergence=lambda x: np.full(x.shape[:-1], 2.0),
    )


def grad_rho_field(domain: Domain) -> VectorFieldSpec:
    """``grad rho_p`` with ``rho_p = d_p^2 / 2``.

    In constant curvature ``Hess rho_p = f g + (1 - f) dd (x) dd`` with
    ``f = r H_kappa(r)`` (n = 2), hence ``div = 1 + f``.
    """
    metric, p = domain.metric, domain.p
    kappa = metric.curvature
    f_vec = np.vectorize(lambda r: rh_kappa(2, kappa, r), otypes=[float])

    def F(x):
        d = metric.distance(x, p)
        c = metric.conformal_factor(x)
        return (d / c**2)[..., None] * metric.distance_grad(x, p)

    def covariant(x):
        d = metric.distance(x, p)
        c = metric.conformal_factor(x)
        n = metric.distance_grad(x, p) / c[..., None]
        f = f_vec(d)
        return (f[..., None, None] * np.eye(2)
                + (1.0 - f)[..., None, None] * n[..., :, None] * n[..., None, :])

    def divergence(x):
        return 1.0 + f_vec(metric.distance(x, p))

    return VectorFieldSpec("grad_rho", F, metric, covariant=covariant, divergence=divergence)


# ---------------------------------------------------------------------------
# scalar fields


@dataclass(frozen=True)
class AnalyticField:
    """Scalar field with Euclidean chart derivatives.

    ``laplacian`` is ``Delta_0 w``, ``grad_laplacian`` its chart gradient and
    ``bilaplacian`` is ``Delta_0^2 w``.  The metric versions are derived.
    """

    name: str
    value: Callable
    grad: Callable
    laplacian: Optional[Callable] = None
    grad_laplacian: Optional[Callable] = None
    bilaplacian: Optional[Callable] = None

    def samples(self, x, metric: MetricModel, need: tuple) -> dict:
        x = np.asarray(x, float)
        out = {"w": np.asarray(self.value(x), float), "dw": np.asarray(self.grad(x), float)}
        if not set(need) & {"lap", "dlap", "lap2"}:
            return out
        if self.laplacian is None:
            raise RellichError(f"field {self.name!r} has no Laplacian evaluator")
        L0 = np.asarray(self.laplacian(x), float)
        ic2 = 1.0 / metric.conformal_factor(x) ** 2
        out["lap"] = ic2 * L0
        if "dlap" in need or "lap2" in need:
            if self.grad_laplacian is None or self.bilaplacian is None:
                raise RellichError(f"field {self.name!r} needs grad_laplacian and bilaplacian")
            dL0 = np.asarray(self.grad_laplacian(x), float)
            k = metric.curvature
            q = 1.0 + k * np.sum(x * x, axis=-1)
            # c^-2 = q^2 / 4 for k != 0; its gradient and Laplacian
            if k == 0.0:
                dic2 = np.zeros_like(x)
                lic2 = np.zeros(x.shape[:-1])
            else:
                dic2 = (q * k)[..., None] * x
                lic2 = 2.0 * k * (1.0 + 2.0 * k * np.sum(x * x, axis=-1))
            out["dlap"] = ic2[..., None] * dL0 + L0[..., None] * dic2
            B0 = np.asarray(self.bilaplacian(x), float)
            lap0_of_lap = ic2 * B0 + 2.0 * np.sum(dic2 * dL0, axis=-1) + L0 * lic2
            out["lap2"] = ic2 * lap0_of_lap
        return out


def polynomial_field(name: str, coeffs: dict) -> AnalyticField:
    """Polynomial ``sum c_ab x^a y^b`` with all derivatives, from ``{(a, b): c}``."""
    terms = [(int(a), int(b), float(c)) for (a, b), c in coeffs.items()]

    def mono(x, a, b):
        if a < 0 or b < 0:
            return np.zeros(x.shape[:-1])
        return x[..., 0] ** a * x[..., 1] ** b

    def d(terms_, axis):
        out = []
        for a, b, c in terms_:
            if axis == 0 and a > 0:
                out.append((a - 1, b, c * a))
            elif axis == 1 and b > 0:
                out.append((a, b - 1, c * b))
        return out

    def lap(terms_):
        return d(d(terms_, 0), 0) + d(d(terms_, 1), 1)

    def ev(terms_):
        return lambda x: sum((c * mono(x, a, b) for a, b, c in terms_),
                             np.zeros(np.shape(x)[:-1]))

    def evg(terms_):
        return lambda x: np.stack([ev(d(terms_, 0))(x), ev(d(terms_, 1))(x)], axis=-1)

    L = lap(terms)
    return AnalyticField(name, ev(terms), evg(terms), ev(L), evg(L), ev(lap(L)))


def trig_field(name: str = "sin_sin", kx: float = math.pi, ky: float = math.pi) -> AnalyticField:
    """``sin(kx x) sin(ky y)``; ``Delta_0 w = -(kx^2 + ky^2) w``."""
    s = kx * kx + ky * ky

    def val(x):
        return np.sin(kx * x[..., 0]) * np.sin(ky * x[..., 1])

    def grad(x):
        return np.stack([kx * np.cos(kx * x[..., 0]) * np.sin(ky * x[..., 1]),
                         ky * np.sin(kx * x[..., 0]) * np.cos(ky * x[..., 1])], axis=-1)

    return AnalyticField(name, val, grad, lambda x: -s * val(x), lambda x: -s * grad(x),
                         lambda x: s * s * val(x))


@dataclass
class FemField:
    """P2 field with discrete derivatives.

    ``Delta w`` is the mixed variable ``M z = (-K + N) u`` and
    ``Delta^2 w`` applies the same operator to ``z``.
    """

    disc: "object"  # problems.Discretization
    u: np.ndarray
    name: str = "fem"
    _z: Optional[np.ndarray] = field(default=None, repr=False)
    _z2: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def space(self) -> FeSpace:
        return self.disc.space

    @property
    def z(self):
        if self._z is None:
            self._z = self.disc.laplacian(self.u, with_flux=True)
        return self._z

    @property
    def z2(self):
        if self._z2 is None:
            self._z2 = self.disc.laplacian(self.z, with_flux=True)
        return self._z2

    def interior(self, rule, need):
        out = {}
        out["w"], out["dw"] = evaluate(self.space, self.u, rule.points)
        if "lap" in need or "dlap" in need:
            out["lap"], out["dlap"] = evaluate(self.space, self.z, rule.points)
        if "lap2" in need:
            out["lap2"], _ = evaluate(self.space, self.z2, rule.points)
        return out

    def boundary(self, rule, need):
        dofs, vals, grads, pts, nrm, L = self.space.boundary_trace_data(rule)

        def trace(v):
            v = np.asarray(v, float)[dofs]
            return (np.einsum("eqa,ea->eq", vals, v), np.einsum("eqai,ea->eqi", grads, v))

        out = {}
        out["w"], out["dw"] = trace(self.u)
        if "lap" in need or "dlap" in need:
            out["lap"], out["dlap"] = trace(self.z)
        if "lap2" in need:
            out["lap2"], _ = trace(self.z2)
        return out, pts, nrm, L


# ---------------------------------------------------------------------------
# quadrature data


@dataclass
class _Interior:
    x: np.ndarray
    dv: np.ndarray
    c: np.ndarray
    S: dict


@dataclass
class _Boundary:
    x: np.ndarray
    ds: np.ndarray
    c: np.ndarray
    nu: np.ndarray  # Euclidean unit chart normals, broadcast to x
    S: dict


def _interior(domain, mesh, w, need, degree):
    rule = triangle_rule(degree)
    x = mesh.quadrature_points(rule)
    c = domain.metric.conformal_factor(x)
    dv = mesh.areas[:, None] * rule.weights[None, :] * c**2
    S = w.interior(rule, need) if isinstance(w, FemField) else w.samples(x, domain.metric, need)
    return _Interior(x, dv, c, S)


def _exact_boundary_ok(domain, mesh) -> bool:
    tags = mesh.boundary_tags
    if tags is None or np.any(tags < 0) or np.any(tags >= len(domain.curves)):
        return False
    return bool(np.all(np.isfinite(mesh.boundary_params)))


def _boundary(domain, mesh, w, need, degree, mode):
    rule = edge_rule(degree)
    metric = domain.metric
    if isinstance(w, FemField):
        if mode == "exact":
            raise RellichError("finite element fields live on the mesh; use boundary='mesh'")
        S, x, nrm, L = w.boundary(rule, need)
        c = metric.conformal_factor(x)
        ds = L[:, None] * rule.weights[None, :] * c
        nu = np.broadcast_to(nrm[:, None, :], x.shape)
        return _Boundary(x, ds, c, nu, S)
    if mode == "exact":
        e = len(mesh.boundary_edges)
        t = np.empty((e, len(rule.points)))
        x = np.empty((e, len(rule.points), 2))
        speed = np.empty_like(t)
        nu = np.empty_like(x)
        for tag in np.unique(mesh.boundary_tags):
            sel = np.flatnonzero(mesh.boundary_tags == tag)
            curve = domain.curves[int(tag)]
            ta, tb = mesh.boundary_params[sel, 0], mesh.boundary_params[sel, 1]
            tt = ta[:, None] + rule.points[None, :] * (tb - ta)[:, None]
            x[sel] = curve.point(tt)
            tg = np.asarray(curve.tangent(tt), float)
            speed[sel] = np.linalg.norm(tg, axis=-1) * np.abs(tb - ta)[:, None]
            nu[sel] = np.stack([tg[..., 1], -tg[..., 0]], axis=-1) / np.linalg.norm(
                tg, axis=-1, keepdims=True)
            t[sel] = tt
        c = metric.conformal_factor(x)
        ds = speed * rule.weights[None, :] * c
    else:
        eds = mesh.boundary_edges
        a, b = mesh.vertices[eds[:, 0]], mesh.vertices[eds[:, 1]]
        x = a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]
        c = metric.conformal_factor(x)
        ds = mesh.boundary_lengths[:, None] * rule.weights[None, :] * c
        nu = np.broadcast_to(mesh.boundary_normals[:, None, :], x.shape)
    S = w.samples(x, metric, need)
    return _Boundary(x, ds, c, nu, S)


def _resolve_mode(domain, mesh, w, boundary):
    if boundary not in ("auto", "mesh", "exact"):
        raise RellichError("boundary must be 'auto', 'mesh' or 'exact'")
    if boundary == "auto":
        curved = not all(isinstance(cv, Segment) for cv in domain.curves)
        exact = (not isinstance(w, FemField)) and curved and _exact_boundary_ok(domain, mesh)
        return "exact" if exact else "mesh"
    if boundary == "exact" and not _exact_boundary_ok(domain, mesh):
        raise RellichError("mesh carries no curve parameters for exact boundary integration")
    return boundary


# ---------------------------------------------------------------------------
# identities


@dataclass(frozen=True)
class IdentityResidual:
    identity: str
    lhs: float
    rhs_terms: dict
    residual: float
    relative_residual: float
    boundary_mode: str = "mesh"

    @property
    def rhs(self) -> float:
        return float(sum(self.rhs_terms.values()))

    def as_dict(self) -> dict:
        return {"identity": self.identity, "lhs": self.lhs, "rhs_terms": dict(self.rhs_terms),
                "rhs": self.rhs, "residual": self.residual,
                "relative_residual": self.relative_residual,
                "boundary_mode": self.boundary_mode}


def _result(identity, lhs, terms, mode) -> IdentityResidual:
    terms = {k: float(v) for k, v in terms.items()}
    lhs = float(lhs)
    res = abs(lhs - sum(terms.values()))
    scale = sum(abs(v) for v in terms.values())
    rel = res / scale if scale > 0 else (0.0 if res == 0 else math.inf)
    return IdentityResidual(identity, lhs, terms, res, rel, mode)


RELLICH_TERMS = ("boundary_flux", "boundary_grad", "boundary_lambda", "interior_div",
                 "interior_DF", "interior_lambda")
POLARIZED_TERMS = ("boundary_flux", "boundary_grad", "interior_div", "interior_DF")
RELLICH2_TERMS = ("interior_div_lap2", "boundary_lap2", "boundary_flux_mixed",
                  "boundary_grad_mixed", "interior_div_mixed", "interior_DF_mixed",
                  "boundary_flux_lambda", "boundary_grad_lambda", "interior_div_lambda",
                  "interior_DF_lambda")


def _fields_at(F: VectorFieldSpec, x):
    flat = x.reshape(-1, 2)
    Fv = F(flat).reshape(x.shape)
    J = F.DF(flat).reshape(x.shape[:-1] + (2, 2))
    div = F.div(flat).reshape(x.shape[:-1])
    return Fv, J, div


def _quad_parts(domain, mesh, w, F, need, degree, edge_degree, boundary):
    if F.metric.curvature != domain.metric.curvature:
        raise RellichError("vector field and domain use different metrics")
    mode = _resolve_mode(domain, mesh, w, boundary)
    I = _interior(domain, mesh, w, need, degree)
    B = _boundary(domain, mesh, w, need, edge_degree, mode)
    FI, JI, divI = _fields_at(F, I.x)
    FB = F(B.x.reshape(-1, 2)).reshape(B.x.shape)
    return mode, I, B, FI, JI, divI, FB


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _bil(J, a, b):
    return np.einsum("...j,...jk,...k->...", a, J, b)


def rellich_residual(domain: Domain, mesh: Mesh, w, F: VectorFieldSpec, lam: float = 0.0,
                     *, degree: int = 7, edge_degree: int = 9,
                     boundary: str = "auto") -> IdentityResidual:
    """Residual of the generalized Rellich identity for ``(w, F, lambda)``.

    ``lhs = int (Delta w + lambda w) <F, grad w>``; the six right-hand terms
    are listed in ``RELLICH_TERMS``.
    """
    if degree < 7:
        raise RellichError("identity checks need interior quadrature degree >= 7")
    mode, I, B, FI, JI, divI, FB = _quad_parts(domain, mesh, w, F, ("lap",), degree,
                                              edge_degree, boundary)
    S, T = I.S, B.S
    ic2 = 1.0 / I.c**2
    lhs = np.sum(I.dv * (S["lap"] + lam * S["w"]) * _dot(FI, S["dw"]))
    Fnu = B.c * _dot(FB, B.nu)
    dnu = _dot(T["dw"], B.nu) / B.c
    gw2 = _dot(T["dw"], T["dw"]) / B.c**2
    terms = {
        "boundary_flux": np.sum(B.ds * dnu * _dot(FB, T["dw"])),
        "boundary_grad": -0.5 * np.sum(B.ds * gw2 * Fnu),
        "boundary_lambda": 0.5 * lam * np.sum(B.ds * T["w"] ** 2 * Fnu),
        "interior_div": 0.5 * np.sum(I.dv * divI * _dot(S["dw"], S["dw"]) * ic2),
        "interior_DF": -np.sum(I.dv * ic2 * _bil(JI, S["dw"], S["dw"])),
        "interior_lambda": -0.5 * lam * np.sum(I.dv * S["w"] ** 2 * divI),
    }
    return _result("rellich", lhs, terms, mode)


def polarized_residual(domain: Domain, mesh: Mesh, w, v, F: VectorFieldSpec, *,
                       degree: int = 7, edge_degree: int = 9,
                       boundary: str = "auto") -> IdentityResidual:
    """Residual of the symmetric bilinear version (``lambda = 0``).

    The interior ``DF`` term is ``-int DF(grad w, grad v) + DF(grad v, grad w)``,
    which is twice the symmetric part.
    """
    if degree < 7:
        raise RellichError("identity checks need interior quadrature degree >= 7")
    mode = _resolve_mode(domain, mesh, w, boundary)
    if _resolve_mode(domain, mesh, v, boundary) != mode:
        raise RellichError("w and v need the same boundary integration mode")
    _, I, B, FI, JI, divI, FB = _quad_parts(domain, mesh, w, F, ("lap",), degree,
                                            edge_degree, mode)
    Iv = _interior(domain, mesh, v, ("lap",), degree).S
    Bv = _boundary(domain, mesh, v, ("lap",), edge_degree, mode).S
    S, T = I.S, B.S
    ic2 = 1.0 / I.c**2
    lhs = np.sum(I.dv * (S["lap"] * _dot(FI, Iv["dw"]) + Iv["lap"] * _dot(FI, S["dw"])))
    Fnu = B.c * _dot(FB, B.nu)
    dnw = _dot(T["dw"], B.nu) / B.c
    dnv = _dot(Bv["dw"], B.nu) / B.c
    terms = {
        "boundary_flux": np.sum(B.ds * (dnw * _dot(FB, Bv["dw"]) + dnv * _dot(FB, T["dw"]))),
        "boundary_grad": -np.sum(B.ds * _dot(T["dw"], Bv["dw"]) / B.c**2 * Fnu),
        "interior_div": np.sum(I.dv * divI * _dot(S["dw"], Iv["dw"]) * ic2),
        "interior_DF": -np.sum(I.dv * ic2 * (_bil(JI, S["dw"], Iv["dw"])
                                             + _bil(JI, Iv["dw"], S["dw"]))),
    }
    return _result("polarized", lhs, terms, mode)


def rellich2_residual(domain: Domain, mesh: Mesh, w, F: VectorFieldSpec, lam: float = 0.0,
                      *, degree: int = 7, edge_degree: int = 9,
                      boundary: str = "auto") -> IdentityResidual:
    """Residual of the fourth-order identity.

    ``lhs = int (Delta^2 w + lambda Delta w) <F, grad w>``; the ten terms are
    listed in ``RELLICH2_TERMS``.
    """
    if degree < 7:
        raise RellichError("identity checks need interior quadrature degree >= 7")
    need = ("lap", "dlap", "lap2")
    mode, I, B, FI, JI, divI, FB = _quad_parts(domain, mesh, w, F, need, degree,
                                              edge_degree, boundary)
    S, T = I.S, B.S
    ic2 = 1.0 / I.c**2
    bc2 = 1.0 / B.c**2
    lhs = np.sum(I.dv * (S["lap2"] + lam * S["lap"]) * _dot(FI, S["dw"]))
    Fnu = B.c * _dot(FB, B.nu)
    dnw = _dot(T["dw"], B.nu) / B.c
    dnl = _dot(T["dlap"], B.nu) / B.c
    terms = {
        "interior_div_lap2": 0.5 * np.sum(I.dv * divI * S["lap"] ** 2),
        "boundary_lap2": -0.5 * np.sum(B.ds * T["lap"] ** 2 * Fnu),
        "boundary_flux_mixed": np.sum(B.ds * (dnw * _dot(FB, T["dlap"])
                                              + dnl * _dot(FB, T["dw"]))),
        "boundary_grad_mixed": -np.sum(B.ds * _dot(T["dw"], T["dlap"]) * bc2 * Fnu),
        "interior_div_mixed": np.sum(I.dv * divI * _dot(S["dw"], S["dlap"]) * ic2),
        "interior_DF_mixed": -np.sum(I.dv * ic2 * (_bil(JI, S["dw"], S["dlap"])
                                                   + _bil(JI, S["dlap"], S["dw"]))),
        "boundary_flux_lambda": lam * np.sum(B.ds * dnw * _dot(FB, T["dw"])),
        "boundary_grad_lambda": -0.5 * lam * np.sum(B.ds * _dot(T["dw"], T["dw"]) * bc2 * Fnu),
        "interior_div_lambda": 0.5 * lam * np.sum(I.dv * divI * _dot(S["dw"], S["dw"]) * ic2),
        "interior_DF_lambda": -lam * np.sum(I.dv * ic2 * _bil(JI, S["dw"], S["dw"])),
    }
    return _result("rellich2", lhs, terms, mode)


# ---------------------------------------------------------------------------
# conditions on F


@dataclass(frozen=True)
class FieldConditionReport:
    c1_div: float
    c2_div: float
    alpha: float
    boundary_min: float
    n_probes: int
    max_fd_mismatch: float
    max_trace_mismatch: float

    @property
    def satisfied(self) -> bool:
        return self.c1_div > 0 and self.alpha > 0 and self.boundary_min >= 0

    def violations(self) -> list[str]:
        out = []
        if not self.c1_div > 0:
            out.append(f"min div F = {self.c1_div:.6g} is not positive")
        if not self.alpha > 0:
            out.append(f"alpha = {self.alpha:.6g} is not positive")
        if not self.boundary_min >= 0:
            out.append(f"<F, nu> reaches {self.boundary_min:.6g} < 0 on the boundary")
        return out

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def field_conditions(domain: Domain, mesh: Mesh, F: VectorFieldSpec, *, degree: int = 7,
                     per_edge: int = 8) -> FieldConditionReport:
    """Sampled ``min/max div F``, ``alpha`` and ``min <F, nu>``.

    Probes are the interior quadrature points plus the boundary samples used
    for ``h_min`` (edge interiors and smooth-arc vertices).
    """
    rule = triangle_rule(degree)
    xi = mesh.quadrature_points(rule).reshape(-1, 2)
    xb, nb = boundary_samples(domain, mesh, per_edge)
    probes = np.vstack([xi, xb])
    J = F.DF(probes)
    sym = 0.5 * (J + np.swapaxes(J, -1, -2))
    alpha = float(np.linalg.eigvalsh(sym)[:, 0].min())
    div = F.div(probes)
    Fnu = domain.metric.conformal_factor(xb) * _dot(F(xb), nb)
    fd, tr = F.consistency(probes)
    return FieldConditionReport(float(div.min()), float(div.max()), alpha, float(Fnu.min()),
                                len(probes), fd, tr)


# ---------------------------------------------------------------------------
# boundary formulas for clamped eigenfunctions


@dataclass(frozen=True)
class BoundaryFormula:
    index: int
    from_formula: float
    from_solver: float

    @property
    def ratio(self) -> float:
        return self.from_formula / self.from_solver

    def as_dict(self) -> dict:
        return {"index": self.index, "from_formula": self.from_formula,
                "from_solver": self.from_solver, "ratio": self.ratio}


def _clamped_preconditions(domain: Domain, mesh: Mesh):
    if domain.metric.curvature != 0.0:
        raise UnsupportedMetric("the boundary formulas are stated for Euclidean domains")
    origin = np.zeros(2)
    if not domain.contains(origin):
        raise PreconditionError("the origin must lie inside the domain")
    x, n = boundary_samples(domain, mesh)
    if np.min(_dot(x, n)) <= 0:
        raise PreconditionError("domain is not star-shaped with respect to the origin")


def _lap_boundary_integral(result, weight_fn, edge_degree=9):
    """``int_bd (Delta_h u)^2 weight(x, nu) ds`` per eigenvector, Delta_h from the solver form."""
    disc = result.disc
    rule = edge_rule(edge_degree)
    dofs, vals, _, pts, nrm, L = disc.space.boundary_trace_data(rule)
    wgt = weight_fn(pts, np.broadcast_to(nrm[:, None, :], pts.shape))
    ds = L[:, None] * rule.weights[None, :] * disc.metric.conformal_factor(pts)
    out = []
    for k in range(len(result.values)):
        z = disc.laplacian(result.vector(k + 1))
        zt = np.einsum("eqa,ea->eq", vals, z[dofs])
        out.append(float(np.sum(ds * zt**2 * wgt)))
    return np.array(out)


def boundary_formula_buckling(domain: Domain, mesh: Mesh, buckling_result,
                              edge_degree: int = 9) -> list[BoundaryFormula]:
    """``Lambda = int_bd (Delta w)^2 d_nu(r^2) / (4 int |grad w|^2)`` per eigenpair.

    On the clamped boundary ``Delta w`` equals the second normal derivative;
    it is taken from the trace of the mixed variable.
    """
    _clamped_preconditions(domain, mesh)
    num = _lap_boundary_integral(buckling_result,
                                 lambda x, n: 2.0 * _dot(x, n), edge_degree)
    K = buckling_result.disc.K
    out = []
    for k in range(len(num)):
        u = buckling_result.vector(k + 1)
        out.append(BoundaryFormula(k + 1, num[k] / (4.0 * float(u @ (K @ u))),
                                   buckling_result.value(k + 1)))
    return out


def boundary_formula_clamped(domain: Domain, mesh: Mesh, clamped_result,
                             edge_degree: int = 9) -> list[BoundaryFormula]:
    """``Gamma^2 = int_bd (Delta w)^2 d_nu(r^2) / (8 int w^2)`` per eigenpair."""
    _clamped_preconditions(domain, mesh)
    num = _lap_boundary_integral(clamped_result,
                                 lambda x, n: 2.0 * _dot(x, n), edge_degree)
    M = clamped_result.disc.M
    out = []
    for k in range(len(num)):
        u = clamped_result.vector(k + 1)
        out.append(BoundaryFormula(k + 1, num[k] / (8.0 * float(u @ (M @ u))),
                                   clamped_result.value(k + 1)))
    return out


# ---------------------------------------------------------------------------
# bounds under conditions A-C

_DIRICHLET_BOUND = "lambda <= int_bd (d_nu w)^2 <F,nu> / ((2 alpha + c1 - c2) int w^2)"
_BUCKLING_BOUND = "int_bd (Delta w)^2 <F,nu> / (2 alpha int |grad w|^2) <= Lambda"


def field_eigenvalue_bounds(domain: Domain, mesh: Mesh, F: VectorFieldSpec, dirichlet_result,
                            buckling_result, *, slack: float = checks.DEFAULT_SLACK,
                            indices: Optional[int] = None,
                            conditions: FieldConditionReport = None,
                            eq_tol: float = 1e-8) -> list:
    """Upper bound on Dirichlet and lower bound on buckling eigenvalues from ``F``.

    Returns one :class:`~speclab.checks.InequalityCheck` per eigenpair;
    violated field conditions turn the checks into skips with the reason.
    """
    cond = conditions if conditions is not None else field_conditions(domain, mesh, F)
    n_d = len(dirichlet_result.values) if indices is None else min(indices,
                                                                   len(dirichlet_result.values))
    n_b = len(buckling_result.values) if indices is None else min(indices,
                                                                  len(buckling_result.values))
    names_d = [f"rellich_dirichlet_upper/k{k}" for k in range(1, n_d + 1)]
    names_b = [f"rellich_buckling_lower/k{k}" for k in range(1, n_b + 1)]
    if not cond.satisfied:
        why = "field conditions violated: " + "; ".join(cond.violations())
        return ([checks.skipped(n, _DIRICHLET_BOUND, why, slack=slack) for n in names_d]
                + [checks.skipped(n, _BUCKLING_BOUND, why, ">=", slack) for n in names_b])
    metric = domain.metric
    out = []

    denom = 2 * cond.alpha + cond.c1_div - cond.c2_div
    disc = dirichlet_result.disc
    for k, name in enumerate(names_d, start=1):
        if denom <= 0:
            out.append(checks.skipped(name, _DIRICHLET_BOUND,
                                      f"2 alpha + c1 - c2 = {denom:.6g} is not positive",
                                      slack=slack))
            continue
        u = dirichlet_result.vector(k)
        nd = normal_derivative(disc.space, u, metric, degree=9)
        Fnu = metric.conformal_factor(nd.points) * np.einsum(
            "eqi,ei->eq", F(nd.points.reshape(-1, 2)).reshape(nd.points.shape), nd.normals)
        num = float(np.sum(nd.weights * nd.values**2 * Fnu))
        rhs = num / (denom * float(u @ (disc.M @ u)))
        out.append(checks.evaluate(name, _DIRICHLET_BOUND, dirichlet_result.value(k), rhs, "<=",
                                   slack, note=f"alpha={cond.alpha:.6g}, c1={cond.c1_div:.6g}, "
                                   f"c2={cond.c2_div:.6g}"))

    equal = abs(cond.c1_div - cond.c2_div) <= eq_tol * max(1.0, abs(cond.c2_div))
    if not equal:
        why = f"requires c1 = c2 (min div F = {cond.c1_div:.6g}, max div F = {cond.c2_div:.6g})"
        out += [checks.skipped(n, _BUCKLING_BOUND, why, ">=", slack) for n in names_b]
        return out

    def weight(x, n):
        Fx = F(x.reshape(-1, 2)).reshape(x.shape)
        return metric.conformal_factor(x) * _dot(Fx, n)

    num = _lap_boundary_integral(buckling_result, weight)
    K = buckling_result.disc.K
    for k, name in enumerate(names_b, start=1):
        u = buckling_result.vector(k)
        lhs = num[k - 1] / (2 * cond.alpha * float(u @ (K @ u)))
        out.append(checks.evaluate(name, _BUCKLING_BOUND, buckling_result.value(k), lhs, ">=",
                                   slack, note=f"alpha={cond.alpha:.6g}, c={cond.c1_div:.6g}"))
    return out
