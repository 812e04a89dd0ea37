import csv
import io
import json

import pytest
from hypothesis import given, strategies as st

from speclab.geometry import disk, ellipse, lshape, spherical_cap
from speclab.harness import (CENTROID, NONPOS_CURV, PLANAR, POS_C1, STAR, SuiteConfig,
                             compute_spectra, fmt_num, run_suite, snap_null_first)

GATES = (STAR, NONPOS_CURV, PLANAR, CENTROID, POS_C1, "field conditions", "requires c1 = c2",
         "is not positive")


@pytest.fixture(scope="module")
def disk_report():
    return run_suite(SuiteConfig(disk(), levels=(2, 3)))


@pytest.fixture(scope="module")
def lshape_report():
    return run_suite(SuiteConfig(lshape(), levels=(2,)))


@pytest.fixture(scope="module")
def cap_report():
    return run_suite(SuiteConfig(spherical_cap(), levels=(2,)))


def test_disk_suite_passes(disk_report):
    s = disk_report.summary
    assert s["fail"] == 0 and s["skipped"] == 0 and s["pass"] == s["total"] > 30
    names = disk_report.by_name()
    assert "xi_lower_mu_k_sigma_2/k1" in names
    assert "rellich_dirichlet_upper/k1" in names
    assert names["planar_sigma2_lower"].verdict == "pass"


def test_checks_sorted_and_unique(disk_report):
    names = [c.name for c in disk_report.checks]
    assert names == sorted(names) and len(set(names)) == len(names)


def test_lshape_gates_on_star_shape(lshape_report):
    assert lshape_report.summary["fail"] == 0
    skipped = [c for c in lshape_report.checks if c.verdict == "skipped"]
    assert skipped and all(any(g in c.reason for g in GATES) for c in skipped)
    assert any(STAR in c.reason for c in skipped)


def test_spherical_cap_gates(cap_report):
    assert cap_report.summary["fail"] == 0
    reasons = {c.reason for c in cap_report.checks if c.verdict == "skipped"}
    assert any(PLANAR in r for r in reasons)
    assert any(NONPOS_CURV in r for r in reasons)
    assert all(any(g in r for g in GATES) for r in reasons)


def test_fault_injection_is_detected():
    rep = run_suite(SuiteConfig(disk(), levels=(2,), corrupt={"bsteklov2": {2: 0.1}}))
    assert rep.summary["fail"] >= 1
    assert all(c.verdict == "fail" for c in rep.failures)


def test_dirichlet_corruption_trips_field_bound():
    rep = run_suite(SuiteConfig(disk(), levels=(2,), corrupt={"dirichlet": {1: 2.0}}))
    assert "rellich_dirichlet_upper/k1" in {c.name for c in rep.failures}


def test_json_round_trip(disk_report):
    doc = json.loads(disk_report.to_json())
    assert doc["summary"] == disk_report.summary
    assert len(doc["checks"]) == len(disk_report.checks)
    assert doc["level"] == 3
    assert doc["spectra"]["neumann"][0] == 0.0
    assert set(doc["checks"][0]) >= {"name", "statement", "lhs", "rhs", "relation", "slack",
                                     "verdict", "reason", "discretization_slack"}


def test_csv_round_trip(disk_report):
    text = disk_report.to_csv()
    assert "\r\n" in text
    rows = list(csv.reader(io.StringIO(text, newline="")))
    assert rows[0][0] == "# speclab"
    header = rows[1]
    body = [dict(zip(header, r)) for r in rows[2:]]
    assert len(body) == len(disk_report.checks)
    for row, c in zip(body, disk_report.checks):
        assert row["name"] == c.name and row["verdict"] == c.verdict
        if c.lhs is not None:
            assert float(row["lhs"]) == c.lhs  # 17 significant digits round-trip


def test_multiplicity_candidates():
    sp, _ = compute_spectra(SuiteConfig(disk(), levels=(1, 2)))
    assert sp.multiplicity_candidates("neumann", 2) == [2]
    assert sp.multiplicity_candidates("dirichlet", 1) == [1]
    assert sp.coarse_level == 1


def test_suite_is_deterministic():
    cfg = SuiteConfig(ellipse(), levels=(1, 2))
    assert run_suite(cfg).to_json() == run_suite(cfg).to_json()


@pytest.mark.parametrize("kw", [dict(levels=()), dict(levels=(3, 2)), dict(k_max=1),
                                dict(slack=1.0), dict(levels=(-1,))])
def test_suite_config_validation(kw):
    with pytest.raises(ValueError):
        SuiteConfig(disk(), **kw)


def test_snap_null_first():
    assert snap_null_first("neumann", [1e-13, 3.4])[0] == 0.0
    assert snap_null_first("neumann", [1e-3, 3.4])[0] == 1e-3
    assert snap_null_first("dirichlet", [1e-13, 3.4])[0] == 1e-13
    assert snap_null_first("steklov", [1e-12])[0] == 0.0


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_num_round_trips(x):
    assert float(fmt_num(x)) == x
    assert fmt_num(None) == ""
