"""P1/P2 Lagrange spaces and metric-weighted assembly.

All forms are written in chart coordinates for ``g = c^2 (dx^2 + dy^2)``:

* stiffness ``int <grad u, grad v>_g dv_g`` equals the Euclidean Dirichlet
  integral (conformal invariance in two dimensions), so no weight appears;
* mass carries ``c^2``, boundary mass carries ``c``;
* the metric normal derivative is ``d_nu^g u = grad u . nu / c``, so the
  flux form ``int v d_nu^g u ds_g`` is again metric free while the normal
  trace Gram matrix carries ``1 / c``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp

from .geometry import EUCLIDEAN, MetricModel
from .meshing import Mesh
from .quadrature import edge_rule, triangle_rule


class AssemblyError(ValueError):
    pass


# ------------------------------------------------------------------ shape functions


def shape_values(order: int, bary: np.ndarray) -> np.ndarray:
    """Basis values at barycentric points, shape ``(nq, nloc)``."""
    L = np.asarray(bary, float)
    if order == 1:
        return L.copy()
    l0, l1, l2 = L[:, 0], L[:, 1], L[:, 2]
    return np.stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1,
    ], axis=1)


def shape_bary_grads(order: int, bary: np.ndarray) -> np.ndarray:
    """Derivatives with respect to the barycentric coordinates, ``(nq, nloc, 3)``."""
    L = np.asarray(bary, float)
    nq = len(L)
    if order == 1:
        return np.broadcast_to(np.eye(3), (nq, 3, 3)).copy()
    D = np.zeros((nq, 6, 3))
    for i in range(3):
        D[:, i, i] = 4 * L[:, i] - 1
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        D[:, 3 + k, i] = 4 * L[:, j]
        D[:, 3 + k, j] = 4 * L[:, i]
    return D


def barycentric_gradients(mesh: Mesh) -> np.ndarray:
    """Chart gradients of the barycentric coordinates, ``(T, 3, 2)``."""
    p = mesh.vertices[mesh.triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    det = 2.0 * mesh.signed_areas
    g = np.empty((mesh.n_triangles, 3, 2))
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        g[:, k, 0] = (y[:, i] - y[:, j]) / det
        g[:, k, 1] = (x[:, j] - x[:, i]) / det
    return g


# ------------------------------------------------------------------ space


@dataclass(frozen=True, eq=False)
class FeSpace:
    """Continuous piecewise polynomial space on a mesh.

    P2 numbering: vertices first, then one dof per mesh edge in the order
    of ``mesh.edges``.  Local P2 dofs 3, 4, 5 sit on the edges opposite
    local vertices 0, 1, 2.
    """

    mesh: Mesh
    order: int = 2

    def __post_init__(self):
        if self.order not in (1, 2):
            raise AssemblyError("order must be 1 or 2")

    @property
    def n_local(self) -> int:
        return 3 if self.order == 1 else 6

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        if self.order == 1:
            return self.mesh.triangles
        return np.hstack([self.mesh.triangles, self.mesh.n_vertices + self.mesh.triangle_edges])

    @property
    def n_dofs(self) -> int:
        m = self.mesh
        return m.n_vertices + (len(m.edges) if self.order == 2 else 0)

    @cached_property
    def dof_coordinates(self) -> np.ndarray:
        m = self.mesh
        if self.order == 1:
            return m.vertices
        e = m.edges
        return np.vstack([m.vertices, 0.5 * (m.vertices[e[:, 0]] + m.vertices[e[:, 1]])])

    @cached_property
    def boundary_dofs(self) -> np.ndarray:
        m = self.mesh
        b = m.boundary_vertices
        if self.order == 2:
            b = np.concatenate([b, m.n_vertices + np.sort(m.boundary_edge_ids)])
        return np.sort(b)

    @cached_property
    def interior_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.boundary_dofs] = False
        return np.flatnonzero(mask)

    @cached_property
    def grad_lambda(self) -> np.ndarray:
        return barycentric_gradients(self.mesh)

    def gradients(self, bary: np.ndarray, cells=None) -> np.ndarray:
        """Chart gradients of the local basis, ``(T, nq, nloc, 2)``."""
        gl = self.grad_lambda if cells is None else self.grad_lambda[cells]
        D = shape_bary_grads(self.order, bary)
        return np.einsum("qak,tki->tqai", D, gl)

    def interpolate(self, f: Callable) -> np.ndarray:
        """Nodal interpolant of ``f(points) -> values``."""
        return np.asarray(f(self.dof_coordinates), float)

    # ------------------------------------------------------------ boundary traces
    @cached_property
    def _boundary_local(self):
        tri, loc = self.mesh.boundary_adjacency
        return tri, loc

    def boundary_trace_data(self, rule):
        """Basis data at edge quadrature points of every boundary edge.

        Returns ``(dofs, values, grads, points, normals, lengths)`` with
        shapes ``(nb, nloc)``, ``(nb, nq, nloc)``, ``(nb, nq, nloc, 2)``,
        ``(nb, nq, 2)``, ``(nb, 2)``, ``(nb,)``.
        """
        m = self.mesh
        tri, loc = self._boundary_local
        nb = len(tri)
        t = rule.points
        bary = np.zeros((nb, len(t), 3))
        a, b = (loc + 1) % 3, (loc + 2) % 3
        rows = np.arange(nb)[:, None]
        bary[rows, np.arange(len(t))[None, :], a[:, None]] = 1.0 - t[None, :]
        bary[rows, np.arange(len(t))[None, :], b[:, None]] = t[None, :]
        flat = bary.reshape(-1, 3)
        vals = shape_values(self.order, flat).reshape(nb, len(t), self.n_local)
        D = shape_bary_grads(self.order, flat).reshape(nb, len(t), self.n_local, 3)
        grads = np.einsum("eqak,eki->eqai", D, self.grad_lambda[tri])
        e = m.boundary_edges
        pa, pb = m.vertices[e[:, 0]], m.vertices[e[:, 1]]
        pts = pa[:, None, :] + t[None, :, None] * (pb - pa)[:, None, :]
        return self.cell_dofs[tri], vals, grads, pts, m.boundary_normals, m.boundary_lengths


# ------------------------------------------------------------------ assembly helpers


def _scatter(space: FeSpace, local: np.ndarray, dofs: np.ndarray, n: Optional[int] = None):
    n = space.n_dofs if n is None else n
    nl = dofs.shape[1]
    rows = np.repeat(dofs, nl, axis=1).ravel()
    cols = np.tile(dofs, (1, nl)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def symmetrize(A):
    A = A.tocsr()
    return ((A + A.T) * 0.5).tocsr()


def assemble_stiffness(space: FeSpace, metric: MetricModel = EUCLIDEAN, degree: int = 4):
    """``K[i, j] = int <grad phi_i, grad phi_j>_g dv_g``.

    In two dimensions ``|grad u|_g^2 dv_g = |grad u|^2 dx`` for a conformal
    metric, so the metric argument does not enter the entries.
    """
    del metric  # conformal invariance
    space.mesh.check_nondegenerate()
    rule = triangle_rule(degree)
    G = space.gradients(rule.points)  # (T, nq, nl, 2)
    w = space.mesh.areas[:, None] * rule.weights[None, :]
    local = np.einsum("tq,tqai,tqbi->tab", w, G, G)
    return symmetrize(_scatter(space, local, space.cell_dofs))


def assemble_mass(space: FeSpace, metric: MetricModel = EUCLIDEAN, degree: int = 4,
                  weight: Optional[Callable] = None):
    """``M[i, j] = int phi_i phi_j c^2 dx`` (times an optional interior weight)."""
    mesh = space.mesh
    mesh.check_nondegenerate()
    rule = triangle_rule(degree)
    phi = shape_values(space.order, rule.points)
    xq = mesh.quadrature_points(rule)
    w = mesh.areas[:, None] * rule.weights[None, :] * metric.conformal_factor(xq) ** 2
    if weight is not None:
        w = w * np.asarray(weight(xq), float)
    local = np.einsum("tq,qa,qb->tab", w, phi, phi)
    return symmetrize(_scatter(space, local, space.cell_dofs))


def _edge_weights(space, metric, rule, weight):
    dofs, vals, grads, pts, nrm, L = space.boundary_trace_data(rule)
    c = metric.conformal_factor(pts)
    wq = L[:, None] * rule.weights[None, :]
    if weight is not None:
        wv = np.asarray(weight(pts, np.repeat(nrm[:, None, :], pts.shape[1], axis=1)), float)
        bad = np.argwhere(~(wv > 0))
        if len(bad):
            e, q = bad[0]
            x = pts[e, q]
            raise AssemblyError(
                f"boundary weight must be positive; got {wv[e, q]:.6g} at ({x[0]:.6g}, {x[1]:.6g})"
            )
        wq = wq * wv
    return dofs, vals, grads, pts, nrm, c, wq


def assemble_boundary_mass(space: FeSpace, metric: MetricModel = EUCLIDEAN,
                           weight: Optional[Callable] = None, degree: Optional[int] = None):
    """``B[i, j] = int phi_i phi_j w ds_g``.

    ``weight(points, normals)`` receives chart points and Euclidean unit
    normals of shape ``(nb, nq, 2)`` and must be strictly positive.
    """
    if degree is None:
        degree = 4 if weight is None and metric.curvature == 0 else 9
    rule = edge_rule(degree)
    dofs, vals, _, _, _, c, wq = _edge_weights(space, metric, rule, weight)
    local = np.einsum("eq,eqa,eqb->eab", wq * c, vals, vals)
    return symmetrize(_scatter(space, local, dofs))


def assemble_flux(space: FeSpace, degree: int = 4):
    """Non-symmetric ``N[i, j] = int_bd phi_i d_nu phi_j ds_g`` (metric free)."""
    rule = edge_rule(degree)
    dofs, vals, grads, _, nrm, L = space.boundary_trace_data(rule)
    dn = np.einsum("eqai,ei->eqa", grads, nrm)
    wq = L[:, None] * rule.weights[None, :]
    local = np.einsum("eq,eqa,eqb->eab", wq, vals, dn)
    return _scatter(space, local, dofs)


def assemble_normal_gram(space: FeSpace, metric: MetricModel = EUCLIDEAN,
                         degree: Optional[int] = None, weight: Optional[Callable] = None):
    """``Nnu[i, j] = int_bd d_nu phi_i d_nu phi_j w ds_g`` with metric normals."""
    if degree is None:
        degree = 4 if metric.curvature == 0 and weight is None else 9
    rule = edge_rule(degree)
    dofs, _, grads, _, nrm, c, wq = _edge_weights(space, metric, rule, weight)
    dn = np.einsum("eqai,ei->eqa", grads, nrm)
    local = np.einsum("eq,eqa,eqb->eab", wq / c, dn, dn)
    return symmetrize(_scatter(space, local, dofs))


def discrete_laplacian_operator(space: FeSpace, K=None, N=None):
    """``G = -K + N`` so that ``M w = G u`` defines ``w = Delta_h u``.

    Testing ``Delta u`` against every basis function and integrating by
    parts gives ``int phi Delta u = -int grad phi . grad u + int_bd phi d_nu u``;
    the boundary term is kept so that ``w`` is consistent for fields that do
    not satisfy homogeneous Neumann data.
    """
    K = assemble_stiffness(space) if K is None else K
    N = assemble_flux(space) if N is None else N
    return (-K + N).tocsr()


@dataclass(frozen=True)
class NormalDerivative:
    values: np.ndarray  # (nb, nq) samples of d_nu^g u
    points: np.ndarray  # (nb, nq, 2)
    normals: np.ndarray  # (nb, 2) Euclidean chart normals
    weights: np.ndarray  # (nb, nq) ds_g quadrature weights


def normal_derivative(space: FeSpace, u: np.ndarray, metric: MetricModel = EUCLIDEAN,
                      degree: int = 4) -> NormalDerivative:
    """Samples of ``d_nu^g u`` on boundary edges from the adjacent element gradient."""
    rule = edge_rule(degree)
    dofs, _, grads, pts, nrm, L = space.boundary_trace_data(rule)
    u = np.asarray(u, float)
    gu = np.einsum("eqai,ea->eqi", grads, u[dofs])
    c = metric.conformal_factor(pts)
    vals = np.einsum("eqi,ei->eq", gu, nrm) / c
    w = L[:, None] * rule.weights[None, :] * c
    return NormalDerivative(vals, pts, nrm, w)


def normal_constraint_matrix(space: FeSpace, points_per_edge: int = 2):
    """Rows ``d_nu u(x_q) = 0`` at Gauss points of every boundary edge.

    For P2 the normal derivative along a straight edge is linear, so two
    points per edge force it to vanish identically on the edge.
    """
    rule = edge_rule(2 * points_per_edge - 2)
    dofs, _, grads, _, nrm, L = space.boundary_trace_data(rule)
    dn = np.einsum("eqai,ei->eqa", grads, nrm)
    # scale rows by edge length so entries are O(1)
    dn = dn * L[:, None, None]
    nb, nq, nl = dn.shape
    rows = np.repeat(np.arange(nb * nq), nl)
    cols = np.repeat(dofs[:, None, :], nq, axis=1).ravel()
    C = sp.coo_matrix((dn.ravel(), (rows, cols)), shape=(nb * nq, space.n_dofs)).tocsr()
    C.sum_duplicates()
    return C


# ------------------------------------------------------------------ field evaluation


def evaluate(space: FeSpace, u: np.ndarray, bary: np.ndarray, cells=None):
    """Values and chart gradients of ``u`` at barycentric points of each cell."""
    u = np.asarray(u, float)
    dofs = space.cell_dofs if cells is None else space.cell_dofs[cells]
    phi = shape_values(space.order, bary)
    val = np.einsum("qa,ta->tq", phi, u[dofs])
    grad = np.einsum("tqai,ta->tqi", space.gradients(bary, cells), u[dofs])
    return val, grad


def integrate(space: FeSpace, f_values: np.ndarray, metric: MetricModel = EUCLIDEAN,
              rule=None) -> float:
    """``int f dv_g`` for values given at the quadrature points of ``rule``."""
    rule = triangle_rule(4) if rule is None else rule
    xq = space.mesh.quadrature_points(rule)
    w = space.mesh.areas[:, None] * rule.weights[None, :] * metric.conformal_factor(xq) ** 2
    return float(np.sum(w * f_values))


Matrix = Union[np.ndarray, sp.spmatrix]
