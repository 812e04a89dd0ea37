"""Strict TOML run configuration.

Example::

    [domain]
    preset = "ellipse"
    a = 2.0
    b = 1.0
    base_point = [0.0, 0.0]

    [mesh]
    levels = [3, 4]

    [problems]
    names = ["dirichlet", "neumann"]
    k_max = 4

    [quadrature]
    degree = 4

    [solver]
    tol = 1e-12
    cluster_tol = 5e-3

    [check]
    slack = 0.02

    [output]
    dir = "out"

Every section and key is optional except ``domain.preset``.  Unknown
sections or keys are errors.  Preset parameters are checked against the
preset's signature.
"""
from __future__ import annotations

import hashlib
import inspect
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .checks import DEFAULT_SLACK
from .geometry import PRESETS, Domain, GeometryError
from .problems import PROBLEMS


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 2."""


SCHEMA = {
    "domain": None,  # preset name plus preset parameters
    "mesh": {"levels"},
    "problems": {"names", "k_max"},
    "quadrature": {"degree"},
    "solver": {"tol", "cluster_tol", "dense_limit", "seed"},
    "check": {"slack", "centroid_tol"},
    "output": {"dir"},
    "test": {"corrupt"},
}


@dataclass
class RunConfig:
    preset: str = "disk"
    domain_params: dict = field(default_factory=dict)
    levels: tuple = (3, 4)
    problems: tuple = PROBLEMS
    k_max: int = 4
    quad_degree: int = 4
    solver_tol: float = 1e-12
    cluster_tol: float = 5e-3
    dense_limit: int = 2000
    seed: int = 20240607
    slack: float = DEFAULT_SLACK
    centroid_tol: float = 1e-8
    out_dir: str = "out"
    corrupt: dict = field(default_factory=dict)
    source: Optional[str] = None

    def domain(self) -> Domain:
        try:
            return PRESETS[self.preset](**self.domain_params)
        except (GeometryError, TypeError, ValueError) as exc:
            raise ConfigError(f"domain: {exc}") from None

    def solver_opts(self) -> dict:
        return {"tol": self.solver_tol, "dense_limit": self.dense_limit, "seed": self.seed}

    def as_dict(self) -> dict:
        return {
            "preset": self.preset,
            "domain_params": {k: _jsonable(v) for k, v in sorted(self.domain_params.items())},
            "levels": list(self.levels),
            "problems": list(self.problems),
            "k_max": self.k_max,
            "quad_degree": self.quad_degree,
            "solver_tol": self.solver_tol,
            "cluster_tol": self.cluster_tol,
            "dense_limit": self.dense_limit,
            "seed": self.seed,
            "slack": self.slack,
            "centroid_tol": self.centroid_tol,
            "corrupt": {p: {str(i): f for i, f in sorted(v.items())}
                        for p, v in sorted(self.corrupt.items())},
        }

    def fingerprint(self) -> str:
        """Hash of everything that affects results (output paths excluded)."""
        from . import __version__
        doc = dict(self.as_dict(), version=__version__)
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]

    def suite_config(self):
        from .harness import SuiteConfig
        return SuiteConfig(self.domain(), self.levels, self.k_max, self.slack, self.cluster_tol,
                           self.centroid_tol, self.quad_degree,
                           {"tol": self.solver_tol, "dense_limit": self.dense_limit,
                            "seed": self.seed},
                           self.corrupt)


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    return v


def _type(where, value, kinds, what):
    # bool is an int subclass; never accept it for numbers
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise ConfigError(f"{where} must be {what}, got {value!r}")
    return value


def _int(where, v, lo=None):
    _type(where, v, int, "an integer")
    if lo is not None and v < lo:
        raise ConfigError(f"{where} must be >= {lo}, got {v}")
    return v


def _real(where, v, lo=None, hi=None, open_lo=False):
    _type(where, v, (int, float), "a number")
    v = float(v)
    if v != v or v in (float("inf"), float("-inf")):
        raise ConfigError(f"{where} must be finite")
    if lo is not None and (v < lo or (open_lo and v == lo)):
        raise ConfigError(f"{where} out of range: {v}")
    if hi is not None and v >= hi:
        raise ConfigError(f"{where} out of range: {v}")
    return v


def _point(where, v):
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(f"{where} must be a list of two numbers")
    return tuple(_real(f"{where}[{i}]", x) for i, x in enumerate(v))


def _domain_section(sec: dict) -> tuple[str, dict]:
    if "preset" not in sec:
        raise ConfigError("domain.preset is required")
    preset = sec["preset"]
    if not isinstance(preset, str) or preset not in PRESETS:
        raise ConfigError(f"domain.preset: unknown preset {preset!r}; "
                          f"choose one of {sorted(PRESETS)}")
    sig = inspect.signature(PRESETS[preset])
    allowed = [n for n in sig.parameters if n not in ("kind", "metric")]
    params = {}
    for key, value in sec.items():
        if key == "preset":
            continue
        if key not in allowed:
            raise ConfigError(f"domain.{key}: not a parameter of preset {preset!r} "
                              f"(allowed: {allowed})")
        where = f"domain.{key}"
        if key in ("base_point", "center"):
            params[key] = _point(where, value)
        elif key == "vertices":
            if not isinstance(value, list) or len(value) < 3:
                raise ConfigError(f"{where} must list at least three [x, y] points")
            params[key] = [_point(f"{where}[{i}]", p) for i, p in enumerate(value)]
        elif key == "n":
            params[key] = _int(where, value, 3)
        else:
            params[key] = _real(where, value)
    return preset, params


def parse_config(doc: dict, source: Optional[str] = None) -> RunConfig:
    """Validate a parsed TOML document into a :class:`RunConfig`."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a table")
    unknown = set(doc) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}; allowed: {sorted(SCHEMA)}")
    for name, keys in SCHEMA.items():
        sec = doc.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")
        if keys is not None:
            bad = set(sec) - keys
            if bad:
                raise ConfigError(f"[{name}]: unknown key(s) {sorted(bad)}; allowed: {sorted(keys)}")
    if "domain" not in doc:
        raise ConfigError("missing [domain] section")
    cfg = RunConfig(source=source)
    cfg.preset, cfg.domain_params = _domain_section(doc["domain"])

    mesh = doc.get("mesh", {})
    if "levels" in mesh:
        lv = mesh["levels"]
        if isinstance(lv, int) and not isinstance(lv, bool):
            lv = [lv]
        if not isinstance(lv, list) or not lv:
            raise ConfigError("mesh.levels must be a non-empty list of integers")
        lv = [_int(f"mesh.levels[{i}]", x, 0) for i, x in enumerate(lv)]
        if lv != sorted(set(lv)):
            raise ConfigError("mesh.levels must be strictly increasing")
        if lv[-1] > 8:
            raise ConfigError("mesh.levels above 8 are not supported")
        cfg.levels = tuple(lv)

    prob = doc.get("problems", {})
    if "names" in prob:
        names = prob["names"]
        if not isinstance(names, list) or not names:
            raise ConfigError("problems.names must be a non-empty list")
        for n in names:
            if n not in PROBLEMS:
                raise ConfigError(f"problems.names: unknown problem {n!r}; choose from {PROBLEMS}")
        if len(set(names)) != len(names):
            raise ConfigError("problems.names has duplicates")
        cfg.problems = tuple(names)
    if "k_max" in prob:
        cfg.k_max = _int("problems.k_max", prob["k_max"], 1)

    quad = doc.get("quadrature", {})
    if "degree" in quad:
        cfg.quad_degree = _int("quadrature.degree", quad["degree"], 2)

    sol = doc.get("solver", {})
    if "tol" in sol:
        cfg.solver_tol = _real("solver.tol", sol["tol"], 0.0, 1.0, open_lo=True)
    if "cluster_tol" in sol:
        cfg.cluster_tol = _real("solver.cluster_tol", sol["cluster_tol"], 0.0, 1.0)
    if "dense_limit" in sol:
        cfg.dense_limit = _int("solver.dense_limit", sol["dense_limit"], 0)
    if "seed" in sol:
        cfg.seed = _int("solver.seed", sol["seed"], 0)

    chk = doc.get("check", {})
    if "slack" in chk:
        cfg.slack = _real("check.slack", chk["slack"], 0.0, 1.0)
    if "centroid_tol" in chk:
        cfg.centroid_tol = _real("check.centroid_tol", chk["centroid_tol"], 0.0)

    out = doc.get("output", {})
    if "dir" in out:
        cfg.out_dir = _type("output.dir", out["dir"], str, "a string")

    test = doc.get("test", {})
    if "corrupt" in test:
        cfg.corrupt = _corrupt(test["corrupt"])
    cfg.domain()  # fail early on invalid geometry
    return cfg


def _corrupt(items) -> dict:
    """Fault-injection entries ``{problem, index, factor}``."""
    if not isinstance(items, list):
        raise ConfigError("test.corrupt must be a list of tables")
    out: dict[str, dict[int, float]] = {}
    for i, it in enumerate(items):
        where = f"test.corrupt[{i}]"
        if not isinstance(it, dict) or set(it) != {"problem", "index", "factor"}:
            raise ConfigError(f"{where} needs exactly the keys problem, index, factor")
        if it["problem"] not in PROBLEMS:
            raise ConfigError(f"{where}.problem: unknown problem {it['problem']!r}")
        out.setdefault(it["problem"], {})[_int(f"{where}.index", it["index"], 1)] = _real(
            f"{where}.factor", it["factor"])
    return out


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return parse_config(doc, str(path))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def loads_config(text: str) -> RunConfig:
    try:
        doc: Any = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(exc)) from None
    return parse_config(doc)
