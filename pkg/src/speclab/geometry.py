"""Planar domains in constant-curvature conformal charts.

Every metric is written as ``g = c(x)^2 (dx^2 + dy^2)`` on a chart of the
plane.  ``kappa = 0`` is the Euclidean plane with ``c = 1``; ``kappa < 0``
uses the Poincare disk chart and ``kappa > 0`` the stereographic chart, both
with ``c = 2 / (1 + kappa |x|^2)``.

A :class:`Domain` couples a metric with a closed boundary built from
straight segments and smooth parametric arcs, and a base point ``p``.  All
chart-level quantities (normals, gradients) are Euclidean in the chart; the
metric conversions happen at the point of use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

if TYPE_CHECKING:  # pragma: no cover
    from .meshing import Mesh


class GeometryError(ValueError):
    """Invalid geometric input."""


class PointOutsideChart(GeometryError):
    pass


class CornerPoint(GeometryError):
    pass


class ProjectionError(GeometryError):
    pass


# --------------------------------------------------------------------------
# metric


@dataclass(frozen=True)
class MetricModel:
    curvature: float = 0.0

    @property
    def kind(self) -> str:
        if self.curvature == 0.0:
            return "euclidean"
        return "hyperbolic" if self.curvature < 0 else "spherical"

    @property
    def chart_radius(self) -> float:
        """Chart radius of the admissible region (inf for Euclidean).

        Hyperbolic: the whole Poincare disk.  Spherical: the image of the
        open hemisphere around the chart origin.
        """
        if self.curvature == 0.0:
            return math.inf
        return 1.0 / math.sqrt(abs(self.curvature))

    def check_points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.curvature != 0.0:
            r = np.linalg.norm(np.atleast_2d(x), axis=-1)
            if np.any(r >= self.chart_radius):
                raise PointOutsideChart(
                    f"point outside the {self.kind} chart (|x| >= {self.chart_radius:g})"
                )
        return x

    def conformal_factor(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.curvature == 0.0:
            return np.ones(x.shape[:-1])
        return 2.0 / (1.0 + self.curvature * np.sum(x * x, axis=-1))

    def grad_log_factor(self, x) -> np.ndarray:
        """Chart gradient of ``log c``; feeds the Christoffel symbols."""
        x = np.asarray(x, dtype=float)
        if self.curvature == 0.0:
            return np.zeros_like(x)
        q = 1.0 + self.curvature * np.sum(x * x, axis=-1)
        return -2.0 * self.curvature * x / q[..., None]

    def distance(self, x, p) -> np.ndarray:
        x = self.check_points(x)
        p = self.check_points(p)
        diff = x - p
        dist2 = np.sum(diff * diff, axis=-1)
        if self.curvature == 0.0:
            return np.sqrt(dist2)
        k = self.curvature
        a = math.sqrt(abs(k))
        qx = 1.0 + k * np.sum(x * x, axis=-1)
        qp = 1.0 + k * np.sum(p * p, axis=-1)
        s = a * np.sqrt(dist2 / (qx * qp))
        if k < 0:
            return 2.0 / a * np.arcsinh(s)
        return 2.0 / a * np.arcsin(np.minimum(s, 1.0))

    def distance_grad(self, x, p) -> np.ndarray:
        """Chart gradient of ``d_p``; zero at ``x = p``."""
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        diff = x - p
        dist2 = np.sum(diff * diff, axis=-1)
        safe = np.where(dist2 > 0, dist2, 1.0)
        if self.curvature == 0.0:
            g = diff / np.sqrt(safe)[..., None]
        else:
            k = self.curvature
            qx = 1.0 + k * np.sum(x * x, axis=-1)
            qp = 1.0 + k * np.sum(p * p, axis=-1)
            t = safe / (qx * qp)
            dt = (2.0 * diff * qx[..., None] - 2.0 * k * dist2[..., None] * x) / (
                qx**2 * qp
            )[..., None]
            g = dt / (np.sqrt(t) * np.sqrt(1.0 - k * t))[..., None]
        return np.where((dist2 > 0)[..., None], g, 0.0)


EUCLIDEAN = MetricModel(0.0)


# --------------------------------------------------------------------------
# boundary pieces


class Curve:
    """One boundary piece, parametrised counterclockwise on ``[t0, t1]``."""

    t0: float
    t1: float
    smooth_ends: bool = False
    closed: bool = False

    def point(self, t) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def tangent(self, t) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def normal(self, t) -> np.ndarray:
        tg = np.atleast_2d(self.tangent(t))
        n = np.stack([tg[:, 1], -tg[:, 0]], axis=-1)
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        return n if np.ndim(t) else n[0]

    def project(self, ta: float, tb: float, x) -> tuple[np.ndarray, float]:
        return self.point(0.5 * (ta + tb)), 0.5 * (ta + tb)

    def locate(self, x, tol: float = 1e-9) -> Optional[float]:  # pragma: no cover
        raise NotImplementedError


@dataclass(frozen=True)
class Segment(Curve):
    a: tuple
    b: tuple
    t0: float = 0.0
    t1: float = 1.0

    def point(self, t):
        t = np.asarray(t, dtype=float)
        a, b = np.asarray(self.a, float), np.asarray(self.b, float)
        return a + t[..., None] * (b - a) if t.ndim else a + float(t) * (b - a)

    def tangent(self, t):
        d = np.asarray(self.b, float) - np.asarray(self.a, float)
        return np.broadcast_to(d, np.shape(t) + (2,)).copy()

    def locate(self, x, tol=1e-9):
        a, b = np.asarray(self.a, float), np.asarray(self.b, float)
        d = b - a
        L2 = d @ d
        t = float((np.asarray(x, float) - a) @ d / L2)
        if -tol <= t <= 1 + tol and np.linalg.norm(a + t * d - x) <= tol * math.sqrt(L2) + tol:
            return min(max(t, 0.0), 1.0)
        return None


@dataclass(frozen=True)
class EllipseArc(Curve):
    """Full ellipse ``c + (ax cos t, ay sin t)``, ``t in [0, 2 pi]``."""

    ax: float
    ay: float
    center: tuple = (0.0, 0.0)
    t0: float = 0.0
    t1: float = 2.0 * math.pi
    smooth_ends: bool = True
    closed: bool = True

    def point(self, t):
        t = np.asarray(t, dtype=float)
        c = np.asarray(self.center, float)
        return c + np.stack([self.ax * np.cos(t), self.ay * np.sin(t)], axis=-1)

    def tangent(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([-self.ax * np.sin(t), self.ay * np.cos(t)], axis=-1)

    def project(self, ta, tb, x):
        if self.ax == self.ay:
            d = np.asarray(x, float) - np.asarray(self.center, float)
            t = math.atan2(d[1], d[0])
            # keep the parameter inside the bracketing interval
            while t < ta - 1e-12:
                t += 2 * math.pi
            while t > tb + 1e-12:
                t -= 2 * math.pi
            if not ta - 1e-9 <= t <= tb + 1e-9:
                t = 0.5 * (ta + tb)
            return self.point(t), t

        x = np.asarray(x, float)

        def f(t):
            return float(self.tangent(t) @ (self.point(t) - x))

        fa, fb = f(ta), f(tb)
        if fa * fb > 0:
            raise ProjectionError(
                f"projection onto ellipse has no root in [{ta:g}, {tb:g}]"
            )
        try:
            t = brentq(f, ta, tb, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        except RuntimeError as exc:  # pragma: no cover - brentq non-convergence
            raise ProjectionError(str(exc)) from exc
        return self.point(t), t

    def locate(self, x, tol=1e-9):
        d = (np.asarray(x, float) - np.asarray(self.center, float)) / [self.ax, self.ay]
        if abs(np.hypot(*d) - 1.0) > tol * 10:
            return None
        return math.atan2(d[1], d[0]) % (2 * math.pi)


# --------------------------------------------------------------------------
# domain


@dataclass(frozen=True)
class Domain:
    """Bounded simply connected chart domain with a base point.

    ``curves`` are traversed counterclockwise and their concatenation is
    the closed boundary.  The ``kind`` and ``params`` fields record the
    preset that built the domain and are used for fingerprints and for the
    initial mesh.
    """

    metric: MetricModel
    curves: tuple
    base_point: tuple
    kind: str = "polygon"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.metric.check_points(np.asarray(self.base_point, float))
        if not self.contains(np.asarray(self.base_point, float)):
            raise GeometryError("base point must lie in the open interior")
        if self.metric.curvature > 0:
            # geodesic radius window of the comparison theorems
            pts = self.boundary_polyline(256)
            r = self.metric.distance(pts, np.asarray(self.base_point, float))
            limit = math.pi / (2.0 * math.sqrt(self.metric.curvature))
            if np.max(r) >= limit:
                raise GeometryError(
                    f"spherical domain exceeds geodesic radius pi/(2 sqrt(kappa)) = {limit:.6g}"
                )

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.base_point, dtype=float)

    @property
    def is_polygon(self) -> bool:
        return all(isinstance(c, Segment) for c in self.curves)

    def with_base_point(self, p) -> "Domain":
        return Domain(self.metric, self.curves, tuple(map(float, p)), self.kind, self.params)

    def boundary_polyline(self, per_curve: int = 64) -> np.ndarray:
        pts = []
        for c in self.curves:
            n = per_curve if not isinstance(c, Segment) else 1
            t = np.linspace(c.t0, c.t1, n + 1)[:-1]
            pts.append(np.atleast_2d(c.point(t)))
        return np.vstack(pts)

    def contains(self, x) -> bool:
        poly = self.boundary_polyline(512)
        x = np.asarray(x, float)
        inside = False
        n = len(poly)
        for i in range(n):
            a, b = poly[i], poly[(i + 1) % n]
            if (a[1] > x[1]) != (b[1] > x[1]):
                xc = a[0] + (x[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
                if x[0] < xc:
                    inside = not inside
        return inside

    def locate(self, s) -> tuple[int, float]:
        """Curve index and parameter of a boundary point."""
        s = np.asarray(s, float)
        for i, c in enumerate(self.curves):
            t = c.locate(s)
            if t is not None:
                at_end = (not c.smooth_ends) and (
                    abs(t - c.t0) < 1e-12 or abs(t - c.t1) < 1e-12
                )
                if at_end:
                    raise CornerPoint(f"boundary point {tuple(s)} is a corner")
                return i, t
        raise GeometryError(f"point {tuple(s)} is not on the boundary")

    def normal_at(self, s) -> np.ndarray:
        i, t = self.locate(s)
        return self.curves[i].normal(t)

    def project(self, tag: int, ta: float, tb: float, x) -> tuple[np.ndarray, float]:
        return self.curves[tag].project(ta, tb, x)

    def initial_mesh(self) -> "Mesh":
        from . import meshing

        return meshing.initial_mesh(self)

    def fingerprint(self) -> str:
        import hashlib
        import json

        doc = {
            "kind": self.kind,
            "kappa": self.metric.curvature,
            "p": [float(v) for v in self.base_point],
            "params": {k: _jsonable(v) for k, v in sorted(self.params.items())},
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def _jsonable(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(u) for u in v]
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


# --------------------------------------------------------------------------
# presets


def disk(radius: float = 1.0, center=(0.0, 0.0), base_point=None) -> Domain:
    if radius <= 0:
        raise GeometryError("radius must be positive")
    p = center if base_point is None else base_point
    return Domain(
        EUCLIDEAN,
        (EllipseArc(radius, radius, tuple(map(float, center))),),
        tuple(map(float, p)),
        "disk",
        {"radius": radius, "center": tuple(center)},
    )


def ellipse(a: float = 2.0, b: float = 1.0, base_point=(0.0, 0.0)) -> Domain:
    if a <= 0 or b <= 0:
        raise GeometryError("semi-axes must be positive")
    return Domain(
        EUCLIDEAN, (EllipseArc(a, b),), tuple(map(float, base_point)), "ellipse", {"a": a, "b": b}
    )


def polygon(vertices: Sequence, base_point=None, kind: str = "polygon",
            metric: MetricModel = EUCLIDEAN) -> Domain:
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
        raise GeometryError("polygon needs at least three 2D vertices")
    area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
    if area == 0:
        raise GeometryError("degenerate polygon")
    if area < 0:
        v = v[::-1]
    curves = tuple(
        Segment(tuple(v[i]), tuple(v[(i + 1) % len(v)])) for i in range(len(v))
    )
    if base_point is None:
        base_point = polygon_centroid(v)
    return Domain(metric, curves, tuple(map(float, base_point)), kind,
                  {"vertices": v.tolist()})


def rectangle(width: float = 1.0, height: float = 1.0, base_point=None) -> Domain:
    if width <= 0 or height <= 0:
        raise GeometryError("rectangle dimensions must be positive")
    d = polygon([(0, 0), (width, 0), (width, height), (0, height)], base_point, "rectangle")
    return Domain(d.metric, d.curves, d.base_point, "rectangle",
                  {"width": width, "height": height})


def lshape(base_point=(0.5, 1.5)) -> Domain:
    """``[0,2]^2`` minus ``[1,2]^2``; not star-shaped about a point in the upper leg."""
    v = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]
    return polygon(v, base_point, "lshape")


def blob(n: int = 16, amplitude: float = 0.08, base_point=None) -> Domain:
    """Convex polygon sampled from ``r = 1 + amplitude cos(3 theta)``."""
    th = 2 * math.pi * np.arange(n) / n
    r = 1.0 + amplitude * np.cos(3 * th)
    v = np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
    d = polygon(v, base_point, "blob")
    return Domain(d.metric, d.curves, d.base_point, "blob", {"n": n, "amplitude": amplitude})


def hyperbolic_disk(geodesic_radius: float = 1.0, kappa: float = -1.0) -> Domain:
    if kappa >= 0:
        raise GeometryError("hyperbolic disk needs kappa < 0")
    a = math.sqrt(-kappa)
    rho = math.tanh(a * geodesic_radius / 2.0) / a
    return Domain(MetricModel(kappa), (EllipseArc(rho, rho),), (0.0, 0.0), "hyperbolic_disk",
                  {"geodesic_radius": geodesic_radius, "kappa": kappa})


def spherical_cap(geodesic_radius: float = 0.5, kappa: float = 1.0) -> Domain:
    if kappa <= 0:
        raise GeometryError("spherical cap needs kappa > 0")
    a = math.sqrt(kappa)
    if geodesic_radius >= math.pi / (2 * a):
        raise GeometryError("spherical cap must stay inside a hemisphere")
    rho = math.tan(a * geodesic_radius / 2.0) / a
    return Domain(MetricModel(kappa), (EllipseArc(rho, rho),), (0.0, 0.0), "spherical_cap",
                  {"geodesic_radius": geodesic_radius, "kappa": kappa})


PRESETS: dict[str, Callable[..., Domain]] = {
    "disk": disk,
    "rectangle": rectangle,
    "ellipse": ellipse,
    "polygon": polygon,
    "blob": blob,
    "lshape": lshape,
    "hyperbolic-disk": hyperbolic_disk,
    "spherical-cap": spherical_cap,
}


def polygon_centroid(v) -> np.ndarray:
    v = np.asarray(v, float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    A = cr.sum() / 2
    return np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6 * A)


# --------------------------------------------------------------------------
# geometric quantities


def geodesic_distance(domain: Domain, x) -> np.ndarray:
    """Distance from the base point, ``d_p(x)``."""
    return domain.metric.distance(x, domain.p)


def support_values(domain: Domain, x, normal) -> np.ndarray:
    """``<grad rho_p, nu>_g`` from chart points and Euclidean unit chart normals."""
    x = np.asarray(x, float)
    d = domain.metric.distance(x, domain.p)
    grad = domain.metric.distance_grad(x, domain.p)
    c = domain.metric.conformal_factor(x)
    return d * np.sum(grad * np.asarray(normal, float), axis=-1) / c


def support_function(domain: Domain, s) -> float:
    """``<grad rho_p, nu>_g`` at a non-corner boundary point ``s``."""
    s = np.asarray(s, float)
    nu = domain.normal_at(s)
    return float(support_values(domain, s, nu))


@dataclass(frozen=True)
class GeometricQuantities:
    r_max: float
    h_min: float
    h_max: float
    volume: float
    boundary_length: float
    inertia2: float
    centroid_residual: Optional[float]
    star_shaped: bool
    samples_per_edge: int
    n_samples: int

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def boundary_samples(domain: Domain, mesh: "Mesh", per_edge: int = 8):
    """Points and outward unit normals used for the support extrema.

    Edge interiors of the mesh boundary (polygon normals) plus boundary
    vertices lying on smooth arcs, where the exact curve normal is used.
    Corners are never sampled.
    """
    e = mesh.boundary_edges
    a, b = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
    t = (np.arange(per_edge) + 0.5) / per_edge
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    nrm = np.repeat(mesh.boundary_normals[:, None, :], per_edge, axis=1)
    pts, nrm = pts.reshape(-1, 2), nrm.reshape(-1, 2)

    extra_p, extra_n = [], []
    if mesh.boundary_tags is not None:
        for k in range(len(e)):
            tag = int(mesh.boundary_tags[k])
            if tag < 0 or tag >= len(domain.curves):
                continue
            curve = domain.curves[tag]
            if isinstance(curve, Segment):
                continue
            t0 = mesh.boundary_params[k, 0]
            if np.isfinite(t0):
                extra_p.append(mesh.vertices[e[k, 0]])
                extra_n.append(curve.normal(t0))
    if extra_p:
        pts = np.vstack([pts, extra_p])
        nrm = np.vstack([nrm, extra_n])
    return pts, nrm


def geometric_quantities(domain: Domain, mesh: "Mesh", degree: int = 4,
                         per_edge: int = 8) -> GeometricQuantities:
    from .quadrature import edge_rule, triangle_rule

    if degree < 4:
        raise GeometryError("quadrature order must be at least 4")
    mesh.check_nondegenerate()
    rule = triangle_rule(degree)
    xq = mesh.quadrature_points(rule)  # (T, nq, 2)
    wq = mesh.areas[:, None] * rule.weights[None, :]
    c2 = domain.metric.conformal_factor(xq) ** 2
    dv = wq * c2
    volume = float(dv.sum())
    d = domain.metric.distance(xq, domain.p)
    inertia2 = float((dv * d**2).sum())
    centroid = None
    if domain.metric.curvature == 0.0:
        centroid = float(np.linalg.norm(np.einsum("tq,tqi->i", dv, xq - domain.p)))

    bverts = mesh.vertices[np.unique(mesh.boundary_edges)]
    pts, nrm = boundary_samples(domain, mesh, per_edge)
    r_max = float(max(domain.metric.distance(bverts, domain.p).max(),
                      domain.metric.distance(pts, domain.p).max()))
    h = support_values(domain, pts, nrm)

    # boundary length under ds_g
    e = mesh.boundary_edges
    er = edge_rule(4)
    a, b = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
    xs = a[:, None, :] + er.points[None, :, None] * (b - a)[:, None, :]
    blen = float((mesh.boundary_lengths[:, None] * er.weights[None, :]
                  * domain.metric.conformal_factor(xs)).sum())
    return GeometricQuantities(
        r_max=r_max,
        h_min=float(h.min()),
        h_max=float(h.max()),
        volume=volume,
        boundary_length=blen,
        inertia2=inertia2,
        centroid_residual=centroid,
        star_shaped=bool(h.min() > 0),
        samples_per_edge=per_edge,
        n_samples=len(h),
    )
