from pathlib import Path

import pytest

from speclab.config import ConfigError, RunConfig, load_config, loads_config

FULL = """
[domain]
preset = "ellipse"
a = 2.0
b = 1
base_point = [0.0, 0.0]

[mesh]
levels = [1, 2]

[problems]
names = ["dirichlet", "neumann"]
k_max = 3

[quadrature]
degree = 5

[solver]
tol = 1e-10
cluster_tol = 1e-3
dense_limit = 500
seed = 7

[check]
slack = 0.05
centroid_tol = 1e-6

[output]
dir = "results"

[[test.corrupt]]
problem = "dirichlet"
index = 2
factor = 0.5
"""


def test_full_document():
    cfg = loads_config(FULL)
    assert cfg.preset == "ellipse" and cfg.domain_params == {"a": 2.0, "b": 1.0,
                                                              "base_point": (0.0, 0.0)}
    assert cfg.levels == (1, 2) and cfg.problems == ("dirichlet", "neumann")
    assert cfg.k_max == 3 and cfg.quad_degree == 5
    assert cfg.solver_opts() == {"tol": 1e-10, "dense_limit": 500, "seed": 7}
    assert cfg.slack == 0.05 and cfg.centroid_tol == 1e-6 and cfg.out_dir == "results"
    assert cfg.corrupt == {"dirichlet": {2: 0.5}}
    suite = cfg.suite_config()
    assert suite.levels == (1, 2) and suite.corrupt == cfg.corrupt
    assert cfg.domain().kind == "ellipse"


def test_defaults_and_single_level():
    cfg = loads_config('[domain]\npreset = "disk"\n[mesh]\nlevels = 3\n')
    assert cfg.levels == (3,)
    assert cfg.k_max == RunConfig().k_max


def test_fingerprint_ignores_output_dir():
    a = loads_config('[domain]\npreset = "disk"\n[output]\ndir = "x"\n')
    b = loads_config('[domain]\npreset = "disk"\n[output]\ndir = "y"\n')
    c = loads_config('[domain]\npreset = "disk"\nradius = 2.0\n')
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()


@pytest.mark.parametrize("text,fragment", [
    ('[domain]\npreset = "torus"\n', "unknown preset"),
    ('[mesh]\nlevels = [1]\n', "domain"),
    ('[domain]\npreset = "disk"\n[extra]\nx = 1\n', "unknown section"),
    ('[domain]\npreset = "disk"\n[mesh]\nlevel = [1]\n', "unknown key"),
    ('[domain]\npreset = "disk"\nwidth = 2.0\n', "not a parameter"),
    ('[domain]\npreset = "disk"\nradius = -1.0\n', "domain"),
    ('[domain]\npreset = "disk"\nradius = true\n', "must be a number"),
    ('[domain]\npreset = "disk"\n[mesh]\nlevels = [2, 1]\n', "strictly increasing"),
    ('[domain]\npreset = "disk"\n[mesh]\nlevels = [9]\n', "above 8"),
    ('[domain]\npreset = "disk"\n[problems]\nnames = ["wave"]\n', "unknown problem"),
    ('[domain]\npreset = "disk"\n[problems]\nk_max = 0\n', ">= 1"),
    ('[domain]\npreset = "disk"\n[check]\nslack = 1.5\n', "out of range"),
    ('[domain]\npreset = "disk"\n[solver]\ntol = 0.0\n', "out of range"),
    ('[domain]\npreset = "disk"\n[[test.corrupt]]\nproblem = "dirichlet"\nindex = 1\n', "keys"),
    ('[domain]\npreset = "disk"\nbase_point = [1.0]\n', "two numbers"),
    ('[domain\n', "line"),
])
def test_invalid_documents(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        loads_config(text)


def test_load_from_file(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(FULL, encoding="utf-8")
    assert load_config(p).source == str(p)
    with pytest.raises(ConfigError, match="bad.toml"):
        (tmp_path / "bad.toml").write_text("[domain]\n", encoding="utf-8")
        load_config(tmp_path / "bad.toml")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_shipped_configs_parse():
    paths = sorted((Path(__file__).parents[1] / "configs").glob("*.toml"))
    assert len(paths) == 8
    for path in paths:
        cfg = load_config(path)
        assert cfg.levels == (3, 4)
        cfg.domain()
