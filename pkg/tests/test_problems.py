import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from speclab.geometry import disk, ellipse, hyperbolic_disk, rectangle
from speclab.meshing import mesh_domain
from speclab.oracles import disk_reference, rectangle_reference
from speclab.problems import (PROBLEMS, SCALING_POWER, Discretization, ProblemError, _solve,
                              solve)

from conftest import discretization

# relative tolerance per problem on the unit disk at level 4
DISK_TOL = {"dirichlet": 3e-3, "neumann": 3e-3, "steklov": 3e-3, "bsteklov1": 8e-2,
            "bsteklov2": 2e-2, "buckling": 5e-3, "clamped": 1e-2}


@pytest.mark.parametrize("problem", PROBLEMS)
def test_disk_spectra_match_oracles(problem):
    disc = discretization("disk", 4)
    got = _solve(problem, disc, 5, 4).values
    ref = disk_reference(problem, 5)
    scale = np.maximum(np.abs(ref), 1.0)
    assert np.all(np.abs(got - ref) / scale < DISK_TOL[problem])


@pytest.mark.parametrize("problem", ["dirichlet", "neumann"])
def test_square_spectra_match_separation_of_variables(problem):
    disc = discretization("rectangle", 3)
    got = _solve(problem, disc, 4, 3).values
    ref = rectangle_reference(problem, 4, 1.0, 1.0)
    assert np.allclose(got, ref, rtol=5e-3, atol=1e-9)


@pytest.mark.parametrize("problem", ["dirichlet", "steklov", "buckling", "clamped"])
def test_errors_decrease_under_refinement(problem):
    ref = disk_reference(problem, 1)[0] if problem != "steklov" else 1.0
    k = 1 if problem != "steklov" else 2
    errs = [abs(_solve(problem, discretization("disk", lv), k, lv).value(k) - ref)
            for lv in (2, 3, 4)]
    assert errs[2] < errs[1] < errs[0]


def test_multiplicities_on_disk():
    res = _solve("neumann", discretization("disk", 3), 5, 3)
    assert res.multiplicity(2) == 2 and res.multiplicity(4) == 2
    assert abs(res.value(1)) < 1e-8


def test_vectors_satisfy_boundary_conditions():
    disc = discretization("disk", 3)
    res = _solve("dirichlet", disc, 2, 3)
    b = disc.space.boundary_dofs
    assert np.all(res.vector(1)[b] == 0)
    clamped = _solve("clamped", disc, 1, 3)
    assert np.all(clamped.vector(1)[b] == 0)


@settings(max_examples=6)
@given(st.floats(0.5, 3.0), st.sampled_from(["dirichlet", "steklov", "bsteklov2", "clamped"]))
def test_scaling_covariance(radius, problem):
    d1 = Discretization(disk(), mesh_domain(disk(), 2))
    dr = Discretization(disk(radius), mesh_domain(disk(radius), 2))
    a = _solve(problem, d1, 3, 2).values
    b = _solve(problem, dr, 3, 2).values
    assert np.allclose(b * radius ** SCALING_POWER[problem], a, rtol=1e-8, atol=1e-9)


@settings(max_examples=5)
@given(st.integers(0, 10**6))
def test_spectrum_invariant_under_element_relabeling(seed):
    dom = ellipse()
    m = mesh_domain(dom, 2)
    perm = np.random.default_rng(seed).permutation(m.n_triangles)
    a = _solve("neumann", Discretization(dom, m), 4, 2).values
    b = _solve("neumann", Discretization(dom, m.permuted(perm)), 4, 2).values
    assert np.allclose(a, b, rtol=1e-10, atol=1e-10)


def test_hyperbolic_dirichlet_is_below_euclidean_of_same_chart():
    # c^2 >= 4 > 1 in the chart, so the hyperbolic mass dominates and lambda decreases
    dom = hyperbolic_disk()
    lam_h = solve("dirichlet", dom, mesh_domain(dom, 3), 1).value(1)
    rho = dom.curves[0].ax
    lam_e = disk_reference("dirichlet", 1, rho)[0]
    assert lam_h < lam_e / 4


def test_explicit_constraint_option_and_errors():
    disc = discretization("rectangle", 2)
    nat = _solve("bsteklov2", disc, 3, 2).values
    exp = _solve("bsteklov2", disc, 3, 2, normal_constraint="explicit").values
    assert exp[1] >= nat[1] - 1e-9  # constraining can only raise the values
    with pytest.raises(ProblemError):
        _solve("dirichlet", disc, 0, 2)
    with pytest.raises(ProblemError):
        _solve("dirichlet", disc, 2, 2, normal_constraint="weak")
    p1 = Discretization(rectangle(), mesh_domain(rectangle(), 1), order=1)
    with pytest.raises(ProblemError):
        _solve("buckling", p1, 1, 1)
