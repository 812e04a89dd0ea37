"""Riccati comparison function and the curvature constants C0-C3.

``H_kappa`` solves ``H' + H^2 + kappa = 0`` with ``r H(r) / (n - 1) -> 1``
as ``r -> 0``.  The constants only involve ``r H_kappa(r)``, which is
constant for ``kappa = 0``, increasing for ``kappa < 0`` and decreasing for
``kappa > 0``; its ``r -> 0`` limit is ``n - 1``.  Extrema over ``[0, r_max)``
are therefore attained at an end point and are evaluated there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq


class ConstantsError(ValueError):
    pass


def _check_n(n):
    if int(n) != n or n < 2:
        raise ConstantsError(f"dimension must be an integer >= 2, got {n}")


def conjugate_radius(kappa: float) -> float:
    """First zero of ``sin(sqrt(kappa) r)``: ``pi / sqrt(kappa)`` (inf if ``kappa <= 0``)."""
    return math.pi / math.sqrt(kappa) if kappa > 0 else math.inf


def comparison_window(kappa2: float) -> float:
    """Largest admissible ``r_max``: ``pi / (2 sqrt(kappa2))`` for ``kappa2 > 0``."""
    return math.pi / (2.0 * math.sqrt(kappa2)) if kappa2 > 0 else math.inf


def h_kappa(n: int, kappa: float, r: float) -> float:
    """``H_kappa(r)`` in closed form."""
    _check_n(n)
    if not r > 0:
        raise ConstantsError("H_kappa needs r > 0")
    if kappa > 0:
        if r >= conjugate_radius(kappa):
            raise ConstantsError(f"r = {r} is beyond pi/sqrt(kappa) = {conjugate_radius(kappa)}")
        a = math.sqrt(kappa)
        return (n - 1) * a / math.tan(a * r)
    if kappa == 0:
        return (n - 1) / r
    a = math.sqrt(-kappa)
    return (n - 1) * a / math.tanh(a * r)


def rh_kappa(n: int, kappa: float, r: float) -> float:
    """``r H_kappa(r)``, extended by its limit ``n - 1`` at ``r = 0``."""
    _check_n(n)
    if r < 0:
        raise ConstantsError("radius must be non-negative")
    x = math.sqrt(abs(kappa)) * r
    if x == 0.0:
        return float(n - 1)
    if kappa > 0:
        if r >= conjugate_radius(kappa):
            raise ConstantsError(f"r = {r} is beyond pi/sqrt(kappa)")
        return (n - 1) * x / math.tan(x)
    return (n - 1) * x / math.tanh(x)


def rh_extrema(n: int, kappa: float, r_max: float) -> tuple[float, float]:
    """``(min, max)`` of ``r H_kappa(r)`` over ``[0, r_max]``."""
    a, b = float(n - 1), rh_kappa(n, kappa, r_max)
    return (min(a, b), max(a, b))


@dataclass(frozen=True)
class CurvatureData:
    n: int
    kappa1: float
    kappa2: float
    r_max: float

    def __post_init__(self):
        _check_n(self.n)
        if self.kappa1 > self.kappa2:
            raise ConstantsError("kappa1 must not exceed kappa2")
        if not self.r_max > 0:
            raise ConstantsError("r_max must be positive")
        w = comparison_window(self.kappa2)
        if self.r_max >= w:
            raise ConstantsError(
                f"r_max = {self.r_max} leaves the comparison window pi/(2 sqrt(kappa2)) = {w:.6g}"
            )


def c0(n: int, kappa: float, r_max: float) -> float:
    """``1 + sup_{(0, r_max]} r H_kappa(r)``; equals ``n`` when ``kappa >= 0``."""
    _check_n(n)
    if not r_max > 0:
        raise ConstantsError("r_max must be positive")
    return 1.0 + rh_extrema(n, kappa, r_max)[1]


def c1(n: int, kappa1: float, kappa2: float, r_max: float) -> float:
    """``(1 + 2/(n-1)) min r H_kappa2 - max r H_kappa1`` over ``[0, r_max)``."""
    CurvatureData(n, kappa1, kappa2, r_max)
    lo2 = rh_extrema(n, kappa2, r_max)[0]
    hi1 = rh_extrema(n, kappa1, r_max)[1]
    return (1.0 + 2.0 / (n - 1)) * lo2 - hi1


def c2(n: int, kappa1: float, kappa2: float, r_max: float) -> float:
    """``1 + min r H_kappa2 - 2 max r H_kappa1 / (n - 1)``."""
    CurvatureData(n, kappa1, kappa2, r_max)
    lo2 = rh_extrema(n, kappa2, r_max)[0]
    hi1 = rh_extrema(n, kappa1, r_max)[1]
    return 1.0 + lo2 - 2.0 * hi1 / (n - 1)


def c3(n: int, kappa1: float, r_max: float) -> float:
    """``n + 1 - max_{[0, r_max)} r H_kappa1``.

    For ``kappa1 <= 0`` this is ``n + 1 - r_max H_kappa1(r_max)``; for
    ``kappa1 > 0`` the maximum sits at ``r -> 0`` and the value is 2.
    """
    _check_n(n)
    if not r_max > 0:
        raise ConstantsError("r_max must be positive")
    if kappa1 > 0 and r_max >= comparison_window(kappa1):
        raise ConstantsError("r_max leaves the comparison window")
    return n + 1.0 - rh_extrema(n, kappa1, r_max)[1]


@dataclass(frozen=True)
class PositivityRadius:
    value: float  # sup of r_max with positive constant; inf if always positive, 0 if never
    status: str  # "always" | "bounded" | "never"

    def as_dict(self):
        return {"value": self.value, "status": self.status}


def _constant_fn(which: str, n, kappa1, kappa2):
    if which == "C1":
        return lambda r: c1(n, kappa1, kappa2, r)
    if which == "C2":
        return lambda r: c2(n, kappa1, kappa2, r)
    if which == "C3":
        return lambda r: c3(n, kappa1, r)
    raise ConstantsError(f"unknown constant {which!r}; expected C1, C2 or C3")


def positivity_radius(which: str, n: int, kappa1: float, kappa2: float) -> PositivityRadius:
    """Largest ``r_0`` such that the constant is positive for ``r_max < r_0``.

    The constants are non-increasing in ``r_max`` (the extrema are taken
    over a growing interval), so the sign changes at most once and
    bisection applies.
    """
    _check_n(n)
    if kappa1 > kappa2:
        raise ConstantsError("kappa1 must not exceed kappa2")
    f = _constant_fn(which, n, kappa1, kappa2)
    top = comparison_window(kappa1 if which == "C3" else kappa2)
    tiny = 1e-12
    if f(tiny) <= 0:
        return PositivityRadius(0.0, "never")
    if math.isfinite(top):
        hi = top * (1 - 1e-12)
        if f(hi) > 0:
            return PositivityRadius(math.inf, "always")
    else:
        hi = 1.0
        while f(hi) > 0:
            hi *= 2.0
            if hi > 1e6:
                return PositivityRadius(math.inf, "always")
    root = brentq(f, tiny, hi, xtol=1e-14, rtol=1e-14, maxiter=500)
    return PositivityRadius(root, "bounded")


def constants_table(n: int, kappa1: float, kappa2: float, r_max: float) -> dict:
    """All constants and positivity radii for one curvature data set.

    ``C0`` uses ``kappa1`` as the Ricci lower bound divided by ``n - 1``.
    """
    data = CurvatureData(n, kappa1, kappa2, r_max)
    out = {
        "n": data.n, "kappa1": data.kappa1, "kappa2": data.kappa2, "r_max": data.r_max,
        "C0": c0(n, kappa1, r_max),
        "C1": c1(n, kappa1, kappa2, r_max),
        "C2": c2(n, kappa1, kappa2, r_max),
        "C3": c3(n, kappa1, r_max),
    }
    for w in ("C1", "C2", "C3"):
        pr = positivity_radius(w, n, kappa1, kappa2)
        out[f"r0_{w}"] = pr.value
        out[f"r0_{w}_status"] = pr.status
    return out
