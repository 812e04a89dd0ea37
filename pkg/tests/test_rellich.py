import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from speclab import checks
from speclab.geometry import disk, hyperbolic_disk, lshape, rectangle
from speclab.meshing import mesh_domain
from speclab.problems import Discretization, _solve
from speclab.rellich import (POLARIZED_TERMS, RELLICH2_TERMS, RELLICH_TERMS, FemField,
                             PreconditionError, UnsupportedMetric, boundary_formula_buckling,
                             boundary_formula_clamped, field_conditions,
                             field_eigenvalue_bounds, grad_rho_field, polarized_residual,
                             polynomial_field, position_field, rellich2_residual,
                             rellich_residual, trig_field)
from speclab.scenarios import SCENARIOS, fit_slope, run_scenario

ONE = polynomial_field("one", {(0, 0): 1.0})
CUBIC = polynomial_field("cubic", {(2, 0): 1.0, (1, 1): 0.5, (0, 3): 0.3, (0, 0): 0.2})


@pytest.fixture(scope="module")
def square2():
    sq = rectangle()
    return sq, mesh_domain(sq, 2)


def test_constant_field_gives_zero_terms(square2):
    sq, m = square2
    for fn in (rellich_residual, rellich2_residual):
        r = fn(sq, m, ONE, position_field((0.3, 0.2)), 0.0)
        assert r.residual == 0.0
        assert all(v == 0.0 for v in r.rhs_terms.values())


def test_term_keys(square2):
    sq, m = square2
    F = position_field()
    assert tuple(rellich_residual(sq, m, CUBIC, F, 1.0).rhs_terms) == RELLICH_TERMS
    assert tuple(rellich2_residual(sq, m, CUBIC, F, 1.0).rhs_terms) == RELLICH2_TERMS
    assert tuple(polarized_residual(sq, m, CUBIC, ONE, F).rhs_terms) == POLARIZED_TERMS


def test_polarization_of_equal_fields_doubles_identity(square2):
    sq, m = square2
    F = position_field((0.5, 0.5))
    single = rellich_residual(sq, m, CUBIC, F, 0.0)
    pol = polarized_residual(sq, m, CUBIC, CUBIC, F)
    assert pol.lhs == pytest.approx(2 * single.lhs, rel=1e-12, abs=1e-12)
    assert abs(pol.residual - 2 * single.residual) <= 1e-12


def test_polarized_with_constant_partner(square2):
    sq, m = square2
    harmonic = polynomial_field("x2-y2", {(2, 0): 1.0, (0, 2): -1.0})
    r = polarized_residual(sq, m, harmonic, ONE, position_field())
    assert r.rhs_terms["interior_DF"] == 0.0 and r.rhs_terms["interior_div"] == 0.0
    assert r.residual <= 1e-12


def test_sine_eigenfunction_left_side_vanishes(square2):
    sq, m = square2
    r = rellich_residual(sq, m, trig_field(), position_field((0.5, 0.5)), 2 * math.pi**2)
    assert abs(r.lhs) <= 1e-12
    assert r.relative_residual <= 1e-8


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_builtin_scenarios_pass(name):
    out = run_scenario(name)
    assert out["passed"], out


def test_analytic_residual_decays_at_second_order():
    d = disk()
    res = [rellich_residual(d, mesh_domain(d, lv), CUBIC, position_field((0.1, -0.2)), 2.0,
                            boundary="exact").residual for lv in (1, 2, 3, 4)]
    assert fit_slope([1, 2, 3, 4], res) >= 1.8


def test_fit_slope():
    assert fit_slope([1, 2, 3], [1.0, 0.25, 0.0625]) == pytest.approx(2.0)
    assert math.isnan(fit_slope([1], [1.0]))
    assert math.isnan(fit_slope([1, 2], [1.0, 0.0]))


@settings(max_examples=5)
@given(st.integers(0, 10**6))
def test_terms_invariant_under_element_relabeling(seed):
    d = disk()
    m = mesh_domain(d, 2)
    perm = np.random.default_rng(seed).permutation(m.n_triangles)
    F = position_field((0.2, 0.1))
    a = rellich2_residual(d, m, CUBIC, F, 0.7, boundary="exact").rhs_terms
    b = rellich2_residual(d, m.permuted(perm), CUBIC, F, 0.7, boundary="exact").rhs_terms
    for k in a:
        assert abs(a[k] - b[k]) <= 1e-12 * max(1.0, abs(a[k]))


def test_low_degree_rejected(square2):
    sq, m = square2
    with pytest.raises(ValueError):
        rellich_residual(sq, m, CUBIC, position_field(), degree=5)


def test_field_conditions_position_field_on_square():
    sq = rectangle()
    m = mesh_domain(sq, 2)
    rep = field_conditions(sq, m, position_field((0.5, 0.5)))
    assert rep.c1_div == pytest.approx(2.0) and rep.c2_div == pytest.approx(2.0)
    assert rep.alpha == pytest.approx(1.0)
    assert rep.boundary_min == pytest.approx(0.5)
    assert rep.satisfied and rep.max_fd_mismatch <= 1e-6 and rep.max_trace_mismatch <= 1e-8


def test_field_conditions_grad_rho_euclidean_disk():
    d = disk()
    rep = field_conditions(d, mesh_domain(d, 2), grad_rho_field(d))
    assert rep.c1_div == pytest.approx(2.0, abs=1e-9)
    assert rep.c2_div == pytest.approx(2.0, abs=1e-9)
    assert rep.alpha == pytest.approx(1.0, abs=1e-9)


def test_field_conditions_grad_rho_hyperbolic_disk():
    h = hyperbolic_disk()
    rep = field_conditions(h, mesh_domain(h, 3), grad_rho_field(h))
    assert rep.c1_div >= 2.0 - 1e-9
    assert rep.c2_div <= 1.0 + 1.0 / math.tanh(1.0) + 1e-9
    assert rep.c2_div > 2.25  # samples reach close to the boundary
    assert rep.alpha == pytest.approx(1.0, abs=1e-6)
    assert rep.max_fd_mismatch <= 1e-6 and rep.max_trace_mismatch <= 1e-8


def test_field_conditions_reports_violation():
    L = lshape()
    rep = field_conditions(L, mesh_domain(L, 2), position_field((0.5, 1.5)))
    assert not rep.satisfied
    assert any("<F, nu>" in v for v in rep.violations())


def test_fem_field_identity_on_hyperbolic_disk():
    # Dirichlet eigenfunction with F = grad rho: the identity holds up to discretization error
    h = hyperbolic_disk()
    rel = []
    for lv in (2, 3):
        disc = Discretization(h, mesh_domain(h, lv))
        res = _solve("dirichlet", disc, 1, lv)
        rel.append(rellich_residual(h, disc.mesh, FemField(disc, res.vector(1)),
                                    grad_rho_field(h), res.value(1)).relative_residual)
    assert rel[1] < rel[0] and rel[1] < 2e-2


@pytest.fixture(scope="module")
def disk3():
    d = disk()
    disc = Discretization(d, mesh_domain(d, 3))
    return d, disc, _solve("dirichlet", disc, 2, 3), _solve("buckling", disc, 2, 3)


def test_boundary_formulas_on_disk(disk3):
    d, disc, _, buck = disk3
    for bf in boundary_formula_buckling(d, disc.mesh, buck):
        assert abs(bf.ratio - 1) < 0.02
    clamped = _solve("clamped", disc, 1, 3)
    assert abs(boundary_formula_clamped(d, disc.mesh, clamped)[0].ratio - 1) < 0.03


def test_boundary_formula_translated_disk():
    d = disk(1.0, center=(0.3, -0.2))
    disc = Discretization(d, mesh_domain(d, 3))
    bf = boundary_formula_buckling(d, disc.mesh, _solve("buckling", disc, 1, 3))[0]
    assert abs(bf.ratio - 1) < 0.02


def test_boundary_formula_preconditions():
    off = disk(0.5, center=(2.0, 0.0))
    disc = Discretization(off, mesh_domain(off, 1))
    with pytest.raises(PreconditionError):
        boundary_formula_buckling(off, disc.mesh, _solve("buckling", disc, 1, 1))
    h = hyperbolic_disk()
    hd = Discretization(h, mesh_domain(h, 1))
    with pytest.raises(UnsupportedMetric):
        boundary_formula_clamped(h, hd.mesh, _solve("clamped", hd, 1, 1))


def test_field_eigenvalue_bounds_hold_on_disk(disk3):
    d, disc, dir_, buck = disk3
    out = field_eigenvalue_bounds(d, disc.mesh, position_field(), dir_, buck)
    assert [c.verdict for c in out] == ["pass"] * 4
    ratios = [c.ratio for c in out]
    assert min(ratios) > 0.9  # the bounds are sharp on the disk


def test_field_eigenvalue_bounds_skip_when_conditions_fail():
    L = lshape()
    disc = Discretization(L, mesh_domain(L, 1))
    out = field_eigenvalue_bounds(L, disc.mesh, position_field((0.5, 1.5)),
                                  _solve("dirichlet", disc, 1, 1), _solve("buckling", disc, 1, 1))
    assert all(c.verdict == "skipped" and "field conditions" in c.reason for c in out)


def test_holds_relation_and_slack():
    assert checks.holds(1.0, 1.01, "<=", 0.0)
    assert not checks.holds(1.05, 1.0, "<=", 0.0)
    assert checks.holds(1.03, 1.0, "<=", 0.02)
    assert checks.holds(1.0, 1.05, ">=", 0.02) is False
    assert checks.holds(0.0, 0.0, "<=", 0.0)
    assert checks.holds(5.0, math.inf, "<=")
    assert not checks.holds(math.nan, 1.0, "<=")
    with pytest.raises(ValueError):
        checks.holds(1.0, 1.0, "<")


def test_check_record_fields():
    c = checks.evaluate("x", "a <= b", 1.0, 2.0)
    assert c.verdict == "pass" and c.slack == 1.0 and c.ratio == 0.5
    g = checks.evaluate("y", "a >= b", 1.0, 2.0, ">=", slack=0.0)
    assert g.verdict == "fail" and g.slack == -1.0
    assert checks.evaluate("z", "", 0.0, 0.0).ratio == 1.0
    assert checks.evaluate("w", "", 1.0, math.inf).ratio == 0.0
    s = checks.skipped("s", "", "why")
    assert s.verdict == "skipped" and s.slack is None and s.as_dict()["reason"] == "why"
    with pytest.raises(ValueError):
        checks.skipped("s", "", "")
