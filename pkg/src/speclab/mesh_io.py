"""Mesh interchange: the JSON schema of record and Gmsh MSH 2.2 ASCII import.

JSON layout::

    {"vertices": [[x, y], ...], "triangles": [[i, j, k], ...],
     "boundary_edges": [[i, j], ...]}

Indices are 0-based.  Coordinates are written with 17 significant digits,
which makes ``import_mesh(export_mesh(m))`` reproduce every vertex bit for
bit.  ``boundary_edges`` may be omitted; it is then rebuilt from the edges
that belong to exactly one triangle.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .meshing import Mesh, MeshError, orient_boundary

JSON_KEYS = ("vertices", "triangles", "boundary_edges")

# Gmsh element types: 1 = 2-node line, 2 = 3-node triangle, 15 = 1-node point
_MSH_NODES_PER_TYPE = {1: 2, 2: 3, 15: 1}


class MeshFormatError(MeshError):
    """Malformed or unsupported mesh file; the message carries the location."""


def _fmt(x: float) -> str:
    s = format(float(x), ".17g")
    if not np.isfinite(x):
        raise MeshError(f"cannot export non-finite coordinate {x}")
    return s


def mesh_to_json(mesh: Mesh) -> str:
    verts = ",\n    ".join(f"[{_fmt(x)}, {_fmt(y)}]" for x, y in mesh.vertices)
    tris = ",\n    ".join(f"[{i}, {j}, {k}]" for i, j, k in mesh.triangles.tolist())
    bnd = ",\n    ".join(f"[{i}, {j}]" for i, j in mesh.boundary_edges.tolist())
    return ('{\n  "vertices": [\n    ' + verts + '\n  ],\n'
            '  "triangles": [\n    ' + tris + '\n  ],\n'
            '  "boundary_edges": [\n    ' + bnd + '\n  ]\n}\n')


def export_mesh(mesh: Mesh, path) -> Path:
    """Write ``mesh`` in the JSON schema."""
    path = Path(path)
    path.write_text(mesh_to_json(mesh), encoding="utf-8")
    return path


def _index_array(data, name, width, n_vertices, where):
    try:
        arr = np.asarray(data, dtype=np.int64)
    except (TypeError, ValueError) as exc:
        raise MeshFormatError(f"{where}: {name} must be a list of integer tuples ({exc})")
    if arr.size == 0:
        arr = arr.reshape(0, width)
    if arr.ndim != 2 or arr.shape[1] != width:
        raise MeshFormatError(f"{where}: {name} entries must have {width} indices")
    bad = np.flatnonzero((arr < 0).any(1) | (arr >= n_vertices).any(1))
    if len(bad):
        raise MeshFormatError(f"{where}: {name}[{bad[0]}] = {arr[bad[0]].tolist()} "
                              f"references a vertex outside 0..{n_vertices - 1}")
    return arr


def _finish(vertices, triangles, boundary_edges, where) -> Mesh:
    """Orient triangles counterclockwise, check conformity and the boundary."""
    p = vertices[triangles]
    area2 = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
             - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    zero = np.flatnonzero(area2 == 0)
    if len(zero):
        raise MeshFormatError(f"{where}: triangle {zero[0]} is degenerate")
    cw = area2 < 0
    if cw.any():
        triangles = triangles.copy()
        triangles[cw] = triangles[cw][:, [0, 2, 1]]
    try:
        derived = orient_boundary(vertices, triangles)
    except MeshError as exc:
        raise MeshFormatError(f"{where}: {exc}") from None
    if boundary_edges is None:
        boundary_edges = derived
    else:
        oriented = {tuple(sorted(e)): tuple(e) for e in derived.tolist()}
        fixed = []
        for i, e in enumerate(boundary_edges.tolist()):
            key = tuple(sorted(e))
            if key not in oriented:
                raise MeshFormatError(f"{where}: boundary edge {i} = {e} is not an edge with "
                                      "exactly one incident triangle")
            fixed.append(oriented[key])
        if len(set(fixed)) != len(fixed) or len(fixed) != len(oriented):
            raise MeshFormatError(f"{where}: boundary edge list has {len(fixed)} entries but the "
                                  f"triangulation has {len(oriented)} boundary edges")
        boundary_edges = np.array(fixed, dtype=np.int64).reshape(-1, 2)
    mesh = Mesh(vertices, triangles, boundary_edges)
    try:
        mesh.validate()
    except MeshError as exc:
        raise MeshFormatError(f"{where}: {exc}") from None
    return mesh


def mesh_from_dict(doc: dict, where: str = "<json>") -> Mesh:
    if not isinstance(doc, dict):
        raise MeshFormatError(f"{where}: top level must be an object")
    unknown = set(doc) - set(JSON_KEYS)
    if unknown:
        raise MeshFormatError(f"{where}: unknown keys {sorted(unknown)}")
    for key in ("vertices", "triangles"):
        if key not in doc:
            raise MeshFormatError(f"{where}: missing required key {key!r}")
    try:
        v = np.asarray(doc["vertices"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise MeshFormatError(f"{where}: vertices must be [x, y] pairs ({exc})")
    if v.ndim != 2 or v.shape[1] != 2 or len(v) == 0:
        raise MeshFormatError(f"{where}: vertices must be a non-empty list of [x, y] pairs")
    if not np.all(np.isfinite(v)):
        raise MeshFormatError(f"{where}: vertices contain non-finite values")
    t = _index_array(doc["triangles"], "triangles", 3, len(v), where)
    if len(t) == 0:
        raise MeshFormatError(f"{where}: no triangles")
    b = None
    if "boundary_edges" in doc:
        b = _index_array(doc["boundary_edges"], "boundary_edges", 2, len(v), where)
    return _finish(v, t, b, where)


def _read_msh(path: Path) -> Mesh:
    lines = path.read_text(encoding="utf-8").splitlines()
    where = str(path)
    i = 0

    def loc(j):
        return f"{where}:{j + 1}"

    def section(name):
        nonlocal i
        while i < len(lines) and lines[i].strip() != f"${name}":
            i += 1
        if i == len(lines):
            raise MeshFormatError(f"{where}: missing ${name} section")
        start = i
        i += 1
        return start

    def end(name):
        nonlocal i
        if i >= len(lines) or lines[i].strip() != f"$End{name}":
            raise MeshFormatError(f"{loc(min(i, len(lines) - 1))}: expected $End{name}")
        i += 1

    def count(name):
        nonlocal i
        try:
            c = int(lines[i].split()[0])
        except (IndexError, ValueError):
            raise MeshFormatError(f"{loc(i)}: expected the {name} count") from None
        i += 1
        return c

    section("MeshFormat")
    head = lines[i].split() if i < len(lines) else []
    if len(head) < 3 or head[0] not in ("2.2", "2.2.0", "2") or head[1] != "0":
        raise MeshFormatError(f"{loc(i)}: only MSH 2.2 ASCII is supported, got {lines[i]!r}")
    i += 1
    end("MeshFormat")

    section("Nodes")
    nn = count("node")
    ids, xy = {}, []
    for _ in range(nn):
        parts = lines[i].split() if i < len(lines) else []
        try:
            nid, x, y = int(parts[0]), float(parts[1]), float(parts[2])
        except (IndexError, ValueError):
            raise MeshFormatError(f"{loc(i)}: malformed node line") from None
        if len(parts) > 3 and float(parts[3]) != 0.0:
            raise MeshFormatError(f"{loc(i)}: node {nid} has nonzero z; only planar meshes")
        if nid in ids:
            raise MeshFormatError(f"{loc(i)}: duplicate node id {nid}")
        ids[nid] = len(xy)
        xy.append((x, y))
        i += 1
    end("Nodes")

    section("Elements")
    ne = count("element")
    tris, lins = [], []
    for _ in range(ne):
        parts = lines[i].split() if i < len(lines) else []
        try:
            eid, etype, ntags = int(parts[0]), int(parts[1]), int(parts[2])
        except (IndexError, ValueError):
            raise MeshFormatError(f"{loc(i)}: malformed element line") from None
        if etype not in _MSH_NODES_PER_TYPE:
            raise MeshFormatError(f"{loc(i)}: element {eid} has unsupported type {etype} "
                                  "(supported: 1 = line, 2 = triangle, 15 = point)")
        nodes = parts[3 + ntags:]
        if len(nodes) != _MSH_NODES_PER_TYPE[etype]:
            raise MeshFormatError(f"{loc(i)}: element {eid} of type {etype} lists "
                                  f"{len(nodes)} nodes")
        try:
            idx = [ids[int(n)] for n in nodes]
        except (KeyError, ValueError):
            raise MeshFormatError(f"{loc(i)}: element {eid} references an unknown node") from None
        if etype == 2:
            tris.append(idx)
        elif etype == 1:
            lins.append(idx)
        i += 1
    end("Elements")
    if not tris:
        raise MeshFormatError(f"{where}: no triangle elements")

    # keep only nodes used by triangles, in file order
    t = np.array(tris, dtype=np.int64)
    used = np.unique(t)
    remap = np.full(len(xy), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    v = np.array(xy, dtype=float)[used]
    t = remap[t]
    b = None
    if lins:
        b = remap[np.array(lins, dtype=np.int64)]
        if np.any(b < 0):
            raise MeshFormatError(f"{where}: a line element uses a node not in any triangle")
    return _finish(v, t, b, where)


def import_mesh(path) -> Mesh:
    """Read a JSON (``.json``) or Gmsh MSH 2.2 ASCII (``.msh``) mesh."""
    path = Path(path)
    if path.suffix.lower() == ".msh":
        return _read_msh(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MeshFormatError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    return mesh_from_dict(doc, str(path))
