"""Conforming triangulations: generation, uniform refinement, validation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .geometry import Domain, EllipseArc, GeometryError, Segment


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh in chart coordinates.

    Triangles are counterclockwise.  Boundary edges are oriented with the
    interior on their left, so the outward normal is the edge direction
    rotated clockwise.  ``boundary_tags`` and ``boundary_params`` map each
    boundary edge to a domain curve and the curve parameters of its two end
    points (``-1`` / ``nan`` when unknown, e.g. for imported meshes).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: Optional[np.ndarray] = None
    boundary_params: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        b = np.ascontiguousarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        nb = len(b)
        tags = (np.full(nb, -1, dtype=np.int64) if self.boundary_tags is None
                else np.ascontiguousarray(self.boundary_tags, dtype=np.int64))
        params = (np.full((nb, 2), np.nan) if self.boundary_params is None
                  else np.ascontiguousarray(self.boundary_params, dtype=float).reshape(-1, 2))
        for name, arr in (("vertices", v), ("triangles", t), ("boundary_edges", b),
                          ("boundary_tags", tags), ("boundary_params", params)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # ---------------------------------------------------------------- counts
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    # ------------------------------------------------------------- geometry
    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def boundary_lengths(self) -> np.ndarray:
        e = self.boundary_edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    @cached_property
    def boundary_normals(self) -> np.ndarray:
        e = self.boundary_edges
        d = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        n = np.stack([d[:, 1], -d[:, 0]], axis=1)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @property
    def h(self) -> float:
        """Longest edge length."""
        p = self.vertices[self.edges]
        return float(np.linalg.norm(p[:, 1] - p[:, 0], axis=1).max())

    def quadrature_points(self, rule) -> np.ndarray:
        p = self.vertices[self.triangles]  # (T, 3, 2)
        return np.einsum("qk,tki->tqi", rule.points, p)

    # ----------------------------------------------------------- topology
    @cached_property
    def _edge_data(self):
        t = self.triangles
        # local edge k is opposite vertex k: (1,2), (2,0), (0,1)
        loc = np.array([[1, 2], [2, 0], [0, 1]])
        all_e = t[:, loc].reshape(-1, 2)
        key = np.sort(all_e, axis=1)
        edges, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        return edges, inv.reshape(-1, 3), counts

    @property
    def edges(self) -> np.ndarray:
        return self._edge_data[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        """(T, 3) edge index of local edge k (opposite local vertex k)."""
        return self._edge_data[1]

    @cached_property
    def boundary_edge_ids(self) -> np.ndarray:
        edges = self.edges
        lookup = {tuple(e): i for i, e in enumerate(edges)}
        return np.array([lookup[tuple(sorted(e))] for e in self.boundary_edges.tolist()],
                        dtype=np.int64)

    @cached_property
    def boundary_adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """Adjacent triangle and local edge index for every boundary edge."""
        te = self.triangle_edges
        owner = np.full(len(self.edges), -1, dtype=np.int64)
        local = np.full(len(self.edges), -1, dtype=np.int64)
        for k in range(3):
            owner[te[:, k]] = np.arange(self.n_triangles)
            local[te[:, k]] = k
        ids = self.boundary_edge_ids
        return owner[ids], local[ids]

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    @property
    def vertex_markers(self) -> np.ndarray:
        m = np.zeros(self.n_vertices, dtype=bool)
        m[self.boundary_vertices] = True
        return m

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges) + self.n_triangles

    # ---------------------------------------------------------- validation
    def check_nondegenerate(self) -> None:
        a = self.signed_areas
        scale = max(self.h, 1e-300) ** 2
        bad = np.flatnonzero(a <= 1e-14 * scale)
        if len(bad):
            raise MeshError(f"triangle {int(bad[0])} has non-positive area {a[bad[0]]:.3e}")

    def validate(self) -> "Mesh":
        self.check_nondegenerate()
        edges, _, counts = self._edge_data
        if np.any(counts > 2):
            k = int(np.flatnonzero(counts > 2)[0])
            raise MeshError(f"non-conforming mesh: edge {tuple(edges[k])} shared by "
                            f"{counts[k]} triangles")
        single = {tuple(e) for e in edges[counts == 1].tolist()}
        given = [tuple(sorted(e)) for e in self.boundary_edges.tolist()]
        if set(given) != single or len(given) != len(single):
            raise MeshError("boundary edges do not match edges with one incident triangle")
        # orientation: each boundary edge must appear in its triangle in the same direction
        tri, loc = self.boundary_adjacency
        nxt = np.array([[1, 2], [2, 0], [0, 1]])
        own = self.triangles[tri[:, None], nxt[loc]]
        if not np.array_equal(own, self.boundary_edges):
            raise MeshError("boundary edges are not oriented with the interior on the left")
        return self

    def min_angle(self) -> float:
        p = self.vertices[self.triangles]
        ang = []
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            w = p[:, (k + 2) % 3] - p[:, k]
            cosv = np.sum(u * w, 1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1))
            ang.append(np.degrees(np.arccos(np.clip(cosv, -1, 1))))
        return float(np.min(ang))

    def polygon_area(self) -> float:
        """Shoelace area enclosed by the boundary loops."""
        e = self.boundary_edges
        a, b = self.vertices[e[:, 0]], self.vertices[e[:, 1]]
        return float(0.5 * np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]))

    def permuted(self, perm: np.ndarray) -> "Mesh":
        """Same mesh with triangle order permuted (vertices unchanged)."""
        return Mesh(self.vertices, self.triangles[perm], self.boundary_edges,
                    self.boundary_tags, self.boundary_params)


def orient_boundary(vertices, triangles) -> np.ndarray:
    """Boundary edges from triangle adjacency, interior on the left."""
    t = np.asarray(triangles)
    loc = np.array([[1, 2], [2, 0], [0, 1]])
    all_e = t[:, loc].reshape(-1, 2)
    key = np.sort(all_e, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    if np.any(counts > 2):
        raise MeshError("non-conforming connectivity: an edge has more than two triangles")
    return all_e[counts[inv] == 1]


# ------------------------------------------------------------------------
# generators


def mesh_rectangle(width: float, height: float, nx: int, ny: int,
                   origin=(0.0, 0.0)) -> Mesh:
    """Structured mesh of ``2 nx ny`` right triangles."""
    if width <= 0 or height <= 0:
        raise MeshError("rectangle dimensions must be positive")
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be at least 1")
    xs = origin[0] + np.linspace(0.0, width, nx + 1)
    ys = origin[1] + np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris += [(a, b, c), (a, c, d)]
    edges, tags, params = [], [], []
    for i in range(nx):
        edges.append((vid(i, 0), vid(i + 1, 0)))
        tags.append(0)
        params.append((i / nx, (i + 1) / nx))
    for j in range(ny):
        edges.append((vid(nx, j), vid(nx, j + 1)))
        tags.append(1)
        params.append((j / ny, (j + 1) / ny))
    for i in range(nx, 0, -1):
        edges.append((vid(i, ny), vid(i - 1, ny)))
        tags.append(2)
        params.append(((nx - i) / nx, (nx - i + 1) / nx))
    for j in range(ny, 0, -1):
        edges.append((vid(0, j), vid(0, j - 1)))
        tags.append(3)
        params.append(((ny - j) / ny, (ny - j + 1) / ny))
    return Mesh(verts, np.array(tris), np.array(edges), np.array(tags), np.array(params))


def _fan(center, ring_pts, ring_params, tag: int = 0) -> Mesh:
    n = len(ring_pts)
    verts = np.vstack([np.asarray(center, float)[None], ring_pts])
    tris = np.array([(0, 1 + i, 1 + (i + 1) % n) for i in range(n)])
    edges = np.array([(1 + i, 1 + (i + 1) % n) for i in range(n)])
    tp = np.asarray(ring_params, float)
    params = np.stack([tp, np.append(tp[1:], tp[0] + 2 * math.pi)], axis=1)
    return Mesh(verts, tris, edges, np.full(n, tag), params)


def _hexagon_fan(curve: EllipseArc) -> Mesh:
    t = np.arange(6) * math.pi / 3.0
    return _fan(curve.center, curve.point(t), t)


def refine(mesh: Mesh, domain: Optional[Domain] = None) -> Mesh:
    """Uniform quadrisection; new boundary vertices are projected onto the domain."""
    V = mesh.n_vertices
    edges = mesh.edges
    te = mesh.triangle_edges
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    verts = np.vstack([mesh.vertices, mids])

    t = mesh.triangles
    m0, m1, m2 = V + te[:, 0], V + te[:, 1], V + te[:, 2]  # opposite vertex 0, 1, 2
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    tris = np.concatenate([
        np.stack([a, m2, m1], 1),
        np.stack([m2, b, m0], 1),
        np.stack([m1, m0, c], 1),
        np.stack([m0, m1, m2], 1),
    ])

    bid = mesh.boundary_edge_ids
    be = mesh.boundary_edges
    new_edges, new_tags, new_params = [], [], []
    for k in range(len(be)):
        i, j = be[k]
        m = V + bid[k]
        tag = int(mesh.boundary_tags[k])
        ta, tb = mesh.boundary_params[k]
        tm = 0.5 * (ta + tb)
        if domain is not None and 0 <= tag < len(domain.curves) and np.isfinite(ta):
            pt, tm = domain.project(tag, float(ta), float(tb), verts[m])
            verts[m] = pt
        new_edges += [(i, m), (m, j)]
        new_tags += [tag, tag]
        new_params += [(ta, tm), (tm, tb)]
    out = Mesh(verts, tris, np.array(new_edges), np.array(new_tags), np.array(new_params))
    out.check_nondegenerate()
    return out


def mesh_disk(radius: float = 1.0, refinement_level: int = 0, center=(0.0, 0.0)) -> Mesh:
    """Hexagonal fan refined ``refinement_level`` times, boundary on the circle."""
    if radius <= 0:
        raise MeshError("radius must be positive")
    if refinement_level < 0:
        raise MeshError("refinement level must be non-negative")
    from .geometry import disk

    dom = disk(radius, center)
    m = _hexagon_fan(dom.curves[0])
    for _ in range(refinement_level):
        m = refine(m, dom)
    return m


def _ear_clip(v: np.ndarray) -> list[tuple[int, int, int]]:
    idx = list(range(len(v)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3 and guard < 10000:
        guard += 1
        best = None
        for k in range(len(idx)):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % len(idx)]
            if cross(v[i0], v[i1], v[i2]) <= 0:
                continue
            if any(
                cross(v[i0], v[i1], v[j]) >= 0 and cross(v[i1], v[i2], v[j]) >= 0
                and cross(v[i2], v[i0], v[j]) >= 0
                for j in idx if j not in (i0, i1, i2)
            ):
                continue
            # prefer the ear with the largest minimum angle
            p = v[[i0, i1, i2]]
            q = min(_angles(p))
            if best is None or q > best[0]:
                best = (q, k)
        if best is None:
            raise MeshError("polygon triangulation failed (self-intersecting boundary?)")
        k = best[1]
        tris.append((idx[k - 1], idx[k], idx[(k + 1) % len(idx)]))
        idx.pop(k)
    tris.append(tuple(idx))
    return tris


def _angles(p) -> list[float]:
    out = []
    for k in range(3):
        u, w = p[(k + 1) % 3] - p[k], p[(k + 2) % 3] - p[k]
        out.append(math.acos(np.clip(u @ w / (np.linalg.norm(u) * np.linalg.norm(w)), -1, 1)))
    return out


def mesh_polygon(domain: Domain) -> Mesh:
    """Coarse mesh of a polygonal domain.

    A fan from the base point when every side sees it strictly, otherwise
    ear clipping.
    """
    v = np.array([c.a for c in domain.curves], dtype=float)
    n = len(v)
    p = domain.p
    d = np.roll(v, -1, axis=0) - v
    nrm = np.stack([d[:, 1], -d[:, 0]], 1)
    sees = np.sum((v - p) * nrm, axis=1) > 1e-12 * np.linalg.norm(nrm, axis=1)
    params = np.tile([0.0, 1.0], (n, 1))
    if np.all(sees) and n > 4:
        verts = np.vstack([p[None], v])
        tris = [(0, 1 + i, 1 + (i + 1) % n) for i in range(n)]
        edges = [(1 + i, 1 + (i + 1) % n) for i in range(n)]
    else:
        verts = v
        tris = _ear_clip(v)
        edges = [(i, (i + 1) % n) for i in range(n)]
    return Mesh(verts, np.array(tris), np.array(edges), np.arange(n), params)


def initial_mesh(domain: Domain) -> Mesh:
    if domain.kind == "rectangle":
        w, h = domain.params["width"], domain.params["height"]
        r = w / h
        nx, ny = (max(1, round(r)), 1) if r >= 1 else (1, max(1, round(1 / r)))
        return mesh_rectangle(w, h, nx, ny)
    if len(domain.curves) == 1 and isinstance(domain.curves[0], EllipseArc):
        return _hexagon_fan(domain.curves[0])
    if domain.is_polygon:
        return mesh_polygon(domain)
    raise GeometryError(f"no mesh generator for domain kind {domain.kind!r}")


def mesh_domain(domain: Domain, level: int) -> Mesh:
    """Initial mesh of ``domain`` refined ``level`` times."""
    if level < 0:
        raise MeshError("level must be non-negative")
    m = initial_mesh(domain)
    for _ in range(level):
        m = refine(m, domain)
    return m


def is_segment_tag(domain: Domain, tag: int) -> bool:
    return 0 <= tag < len(domain.curves) and isinstance(domain.curves[tag], Segment)
