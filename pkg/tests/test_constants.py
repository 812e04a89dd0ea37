import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.differentiate import derivative
from scipy.optimize import brentq

from speclab.constants import (ConstantsError, CurvatureData, c0, c1, c2, c3, comparison_window,
                               constants_table, h_kappa, positivity_radius, rh_kappa)

from constants_oracle import TUPLES, sampled_constants


def coth(x):
    return 1.0 / math.tanh(x)


@pytest.mark.parametrize("n,kappa,r,expected", [
    (2, 0.0, 0.5, 2.0),
    (2, -1.0, 1.0, coth(1.0)),
    (2, 1.0, 0.5, 1.0 / math.tan(0.5)),
    (3, -4.0, 0.25, 2 * 2 * coth(0.5)),
])
def test_h_kappa_closed_forms(n, kappa, r, expected):
    assert h_kappa(n, kappa, r) == pytest.approx(expected, rel=1e-14)


def test_h_kappa_continuous_across_zero():
    for eps in (1e-6, -1e-6):
        assert h_kappa(3, eps, 0.8) == pytest.approx(2 / 0.8, abs=1e-6)


@pytest.mark.parametrize("n,kappa", [(2, 0.0), (2, -1.0), (2, 1.0), (3, -0.5), (3, 2.0), (5, 4.0)])
def test_riccati_equation(n, kappa):
    top = 0.95 * math.pi / math.sqrt(kappa) if kappa > 0 else 3.0
    rs = np.linspace(0.05, top, 100)
    f = np.vectorize(lambda r: h_kappa(n, kappa, r))
    res = derivative(f, rs, initial_step=1e-2)
    assert np.all(res.success)
    h = f(rs)
    # the comparison function of dimension n solves the Riccati equation scaled by n - 1
    assert np.max(np.abs(res.df + h**2 / (n - 1) + (n - 1) * kappa)) <= 1e-6


def test_riccati_matches_ode_integration():
    from scipy.integrate import solve_ivp
    r0 = 1e-6
    sol = solve_ivp(lambda r, y: [-y[0] ** 2 + 1.0], (r0, 1.0), [coth(r0)],
                    rtol=1e-12, atol=1e-12)
    assert sol.y[0, -1] == pytest.approx(h_kappa(2, -1.0, 1.0), rel=1e-8)


@pytest.mark.parametrize("kappa,trend", [(-1.0, 1), (0.0, 0), (1.0, -1)])
def test_rh_monotonicity(kappa, trend):
    r = np.linspace(0.0, 1.4, 200)
    d = np.diff([rh_kappa(3, kappa, x) for x in r])
    if trend == 0:
        assert np.all(d == 0)
    else:
        assert np.all(trend * d > 0)


def test_exact_flat_values():
    assert c0(2, 0.0, 1.0) == 2.0
    for n in (2, 3, 4, 7):
        assert c1(n, 0.0, 0.0, 1.3) == 2.0
        assert c2(n, 0.0, 0.0, 1.3) == n - 2
        assert c3(n, 0.0, 1.3) == 2.0


def test_derived_values():
    assert c0(2, -1.0, 1.0) == pytest.approx(1 + coth(1.0), rel=1e-14)
    assert c0(3, 1.0, 0.5) == 3.0
    assert c1(2, -1.0, -1.0, 1.0) == pytest.approx(3 - coth(1.0), rel=1e-14)
    assert c1(2, -1.0, -1.0, 1.0) == pytest.approx(1.6870, abs=1e-4)
    expected = 3 * (0.3 / math.tan(0.3)) - 0.3 * coth(0.3)
    assert c1(2, -1.0, 1.0, 0.3) == pytest.approx(expected, rel=1e-14)
    assert c2(2, -1.0, -1.0, 1.0) == pytest.approx(2 - 2 * coth(1.0), rel=1e-14)
    assert c2(2, -1.0, -1.0, 1.0) == pytest.approx(-0.6261, abs=1e-4)
    assert c3(2, -1.0, 1.0) == pytest.approx(1.6870, abs=1e-4)
    assert c3(2, 0.5, 1.0) == 2.0


@pytest.mark.parametrize("tup", TUPLES, ids=lambda t: "n{}_k{}_{}_r{}".format(*t))
def test_constants_match_grid_sampling(tup):
    n, k1, k2, r = tup
    grid = sampled_constants(n, k1, k2, r)
    assert abs(c0(n, k1, r) - grid["C0"]) <= 1e-9
    assert abs(c1(n, k1, k2, r) - grid["C1"]) <= 1e-9
    assert abs(c2(n, k1, k2, r) - grid["C2"]) <= 1e-9
    assert abs(c3(n, k1, r) - grid["C3"]) <= 1e-9


@pytest.mark.parametrize("fn", ["C1", "C2", "C3"])
def test_continuity_across_zero_curvature(fn):
    def val(k1, k2):
        return constants_table(3, k1, k2, 0.9)[fn]
    base = val(0.0, 0.0)
    assert abs(val(-1e-7, 1e-7) - base) <= 1e-6
    assert abs(val(1e-7, 2e-7) - base) <= 1e-6
    assert abs(val(-2e-7, -1e-7) - base) <= 1e-6


def test_positivity_radii():
    assert positivity_radius("C1", 2, 0.0, 0.0).value == math.inf
    never = positivity_radius("C2", 2, -1.0, -1.0)
    assert never.status == "never" and never.value == 0.0
    r0 = positivity_radius("C3", 2, -1.0, 0.0)
    oracle = brentq(lambda r: r * coth(r) - 3.0, 1.0, 5.0, xtol=1e-15)
    assert r0.status == "bounded"
    assert r0.value == pytest.approx(oracle, rel=1e-10)
    assert r0.value == pytest.approx(2.98470, abs=1e-5)


@settings(max_examples=40)
@given(n=st.integers(2, 6), k1=st.floats(-3, 0.0), k2=st.floats(-3, 3),
       which=st.sampled_from(["C1", "C2", "C3"]))
def test_positivity_radius_separates_signs(n, k1, k2, which):
    k1 = min(k1, k2)
    pr = positivity_radius(which, n, k1, k2)
    fn = {"C1": lambda r: c1(n, k1, k2, r), "C2": lambda r: c2(n, k1, k2, r),
          "C3": lambda r: c3(n, k1, r)}[which]
    window = comparison_window(k2) if which != "C3" else math.inf
    if pr.status == "bounded":
        assert fn(0.99 * pr.value) > 0
        if 1.01 * pr.value < window:
            assert fn(1.01 * pr.value) <= 0
    elif pr.status == "always":
        assert fn(0.5 * min(window, 10.0)) > 0
    else:
        assert fn(1e-3) <= 1e-9


@settings(max_examples=40)
@given(n=st.integers(2, 6), k1=st.floats(-3, 3), dk=st.floats(0, 3),
       f1=st.floats(0.05, 0.95), f2=st.floats(0.05, 0.95))
def test_constants_non_increasing_in_radius(n, k1, dk, f1, f2):
    k2 = k1 + dk
    w = min(comparison_window(k2), 4.0)
    a, b = sorted((f1 * w, f2 * w))
    assert c1(n, k1, k2, b) <= c1(n, k1, k2, a) + 1e-12
    assert c2(n, k1, k2, b) <= c2(n, k1, k2, a) + 1e-12
    assert c3(n, k1, b) <= c3(n, k1, a) + 1e-12


@pytest.mark.parametrize("args", [
    (2, 1.0, 0.0, 1.0),       # kappa1 > kappa2
    (2, 0.0, 1.0, 2.0),       # outside pi / (2 sqrt(kappa2))
    (2, 0.0, 0.0, 0.0),       # r_max not positive
    (1, 0.0, 0.0, 1.0),       # dimension too small
    (2.5, 0.0, 0.0, 1.0),
])
def test_invalid_curvature_data(args):
    with pytest.raises(ConstantsError):
        CurvatureData(*args)


def test_h_kappa_domain_errors():
    with pytest.raises(ConstantsError):
        h_kappa(2, 1.0, math.pi)
    with pytest.raises(ConstantsError):
        h_kappa(2, 0.0, 0.0)
    with pytest.raises(ConstantsError):
        positivity_radius("C4", 2, 0.0, 0.0)
