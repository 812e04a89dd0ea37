import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from speclab.geometry import PRESETS, disk, ellipse, lshape, rectangle
from speclab.meshing import (Mesh, MeshError, mesh_disk, mesh_domain, mesh_rectangle, refine)

PRESET_NAMES = sorted(PRESETS)


def _preset(name):
    if name == "polygon":
        return PRESETS[name]([(0, 0), (1, 0), (1.2, 0.8), (0.1, 1.0)])
    return PRESETS[name]()


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_meshes_are_valid_at_every_level(name):
    dom = _preset(name)
    for level in range(4):
        m = mesh_domain(dom, level)
        m.validate()
        assert m.euler_characteristic() == 1
        assert np.all(m.signed_areas > 0)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_refinement_quadruples_triangles_and_halves_h(name):
    dom = _preset(name)
    a, b = mesh_domain(dom, 2), mesh_domain(dom, 3)
    assert b.n_triangles == 4 * a.n_triangles
    assert b.h == pytest.approx(a.h / 2, rel=0.1)


@pytest.mark.parametrize("name", ["disk", "ellipse", "hyperbolic-disk", "spherical-cap"])
def test_curved_boundary_vertices_lie_on_curve(name):
    dom = _preset(name)
    m = mesh_domain(dom, 4)
    for k, (i, _) in enumerate(m.boundary_edges):
        t = m.boundary_params[k, 0]
        assert np.allclose(dom.curves[0].point(t), m.vertices[i], atol=1e-12)


def test_min_angle_does_not_degrade():
    for dom in (disk(), ellipse(), lshape()):
        angles = [mesh_domain(dom, lv).min_angle() for lv in range(1, 5)]
        assert min(angles) > math.radians(12)
        assert angles[-1] >= 0.8 * angles[0]


def test_polygon_area_preserved_exactly():
    for dom in (rectangle(2.0), lshape()):
        areas = [mesh_domain(dom, lv).areas.sum() for lv in range(4)]
        assert np.allclose(areas, areas[0], rtol=1e-14)


def test_disk_area_converges_quadratically():
    err = [math.pi - mesh_disk(1.0, lv).areas.sum() for lv in (2, 3, 4)]
    rates = [math.log2(err[i] / err[i + 1]) for i in range(2)]
    assert all(r == pytest.approx(2.0, abs=0.1) for r in rates)


def test_boundary_orientation_outward():
    m = mesh_domain(disk(), 3)
    mid = 0.5 * (m.vertices[m.boundary_edges[:, 0]] + m.vertices[m.boundary_edges[:, 1]])
    assert np.all(np.sum(mid * m.boundary_normals, axis=1) > 0)
    assert m.boundary_lengths.sum() == pytest.approx(2 * math.pi, rel=2e-3)


def test_mesh_is_immutable():
    m = mesh_rectangle(1.0, 1.0, 2, 2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0


@given(st.integers(0, 2**32 - 1))
def test_permuted_mesh_has_same_geometry(seed):
    m = mesh_domain(rectangle(2.0), 1)
    perm = np.random.default_rng(seed).permutation(m.n_triangles)
    p = m.permuted(perm)
    p.validate()
    assert p.areas.sum() == pytest.approx(m.areas.sum(), rel=1e-14)
    assert sorted(map(tuple, np.sort(p.triangles, 1))) == sorted(map(tuple, np.sort(m.triangles, 1)))


def test_validate_rejects_bad_meshes():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(MeshError):
        Mesh(v, np.array([[0, 2, 1]]), np.array([[0, 1], [1, 2], [2, 0]])).validate()
    with pytest.raises(MeshError):
        Mesh(v, np.array([[0, 1, 1]]), np.array([[0, 1], [1, 2], [2, 0]])).validate()
    with pytest.raises(MeshError):
        mesh_domain(disk(), -1)


def test_refine_without_domain_keeps_chords():
    m = refine(mesh_disk(1.0, 0))
    r = np.linalg.norm(m.vertices[m.boundary_vertices], axis=1)
    assert r.min() < 0.9
