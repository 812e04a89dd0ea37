"""Reference spectra that do not use the finite element code.

* disk and rectangle spectra of the second-order problems from Bessel zeros
  and separation of variables;
* fourth-order disk spectra from a radial shooting method: the angular mode
  ``m`` reduces the problem to an ODE in ``r``, regular solutions are
  started from their power series near the centre and integrated outward,
  and the eigenvalue is a root of the boundary-condition determinant.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import jn_zeros, jnp_zeros


def _with_multiplicity(pairs, k):
    """Expand ``(value, multiplicity)`` pairs into the ``k`` smallest values."""
    out = []
    for v, mult in sorted(pairs):
        out.extend([v] * mult)
    return np.array(out[:k])


def disk_dirichlet(k: int, radius: float = 1.0) -> np.ndarray:
    pairs = []
    for m in range(k + 1):
        for z in jn_zeros(m, k):
            pairs.append((z * z / radius**2, 1 if m == 0 else 2))
    return _with_multiplicity(pairs, k)


def disk_neumann(k: int, radius: float = 1.0) -> np.ndarray:
    pairs = [(0.0, 1)]
    for m in range(k + 1):
        for z in jnp_zeros(m, k):
            pairs.append((z * z / radius**2, 1 if m == 0 else 2))
    return _with_multiplicity(pairs, k)


def disk_steklov(k: int, radius: float = 1.0) -> np.ndarray:
    pairs = [(0.0, 1)] + [(m / radius, 2) for m in range(1, k + 1)]
    return _with_multiplicity(pairs, k)


def rectangle_dirichlet(k: int, width: float = 1.0, height: float = 1.0) -> np.ndarray:
    n = k + 2
    vals = [math.pi**2 * ((i / width) ** 2 + (j / height) ** 2)
            for i in range(1, n + 1) for j in range(1, n + 1)]
    return np.sort(vals)[:k]


def rectangle_neumann(k: int, width: float = 1.0, height: float = 1.0) -> np.ndarray:
    n = k + 2
    vals = [math.pi**2 * ((i / width) ** 2 + (j / height) ** 2)
            for i in range(n + 1) for j in range(n + 1)]
    return np.sort(vals)[:k]


# ---------------------------------------------------------------------------
# radial shooting for fourth-order problems on the unit disk
#
# With u = f(r) cos(m theta) and L f = f'' + f'/r - m^2 f / r^2, every
# problem here is  L^2 f + beta L f - gamma f = 0.  Regular solutions are
# f = sum_j a_j r^(m + 2 j); with c_j = 4 j (m + j) the coefficients satisfy
#   a_{j+2} c_{j+2} c_{j+1} + beta a_{j+1} c_{j+1} - gamma a_j = 0.


def _series(m, beta, gamma, a0, a1, r, terms=60):
    a = [a0, a1]
    for j in range(terms):
        c1 = 4 * (j + 1) * (m + j + 1)
        c2 = 4 * (j + 2) * (m + j + 2)
        a.append((gamma * a[j] - beta * c1 * a[j + 1]) / (c2 * c1))
    f = fp = g = gp = 0.0
    for j, aj in enumerate(a):
        p = m + 2 * j
        f += aj * r**p
        fp += aj * p * r ** (p - 1) if p else 0.0
        cj = 4 * j * (m + j)
        if j >= 1:
            q = p - 2
            g += aj * cj * r**q
            gp += aj * cj * q * r ** (q - 1) if q else 0.0
    return np.array([f, fp, g, gp])


def _rhs(m, beta, gamma):
    def f(r, y):
        u, up, g, gp = y
        upp = g - up / r + m * m * u / r**2
        gpp = gamma * u - beta * g - gp / r + m * m * g / r**2
        return [up, upp, gp, gpp]

    return f


def _shoot(m, beta, gamma, r0=0.05, rtol=1e-12, atol=1e-14):
    """Values ``(f, f', Lf, (Lf)')`` at ``r = 1`` for the two regular solutions."""
    out = []
    for a0, a1 in ((1.0, 0.0), (0.0, 1.0)):
        y0 = _series(m, beta, gamma, a0, a1, r0)
        sol = solve_ivp(_rhs(m, beta, gamma), (r0, 1.0), y0, method="DOP853",
                        rtol=rtol, atol=atol)
        if not sol.success:  # pragma: no cover - integrator failure
            raise RuntimeError(sol.message)
        out.append(sol.y[:, -1])
    return out


def _clamped_det(m, beta, gamma):
    s1, s2 = _shoot(m, beta, gamma)
    scale = max(np.abs(s1[:2]).max(), np.abs(s2[:2]).max(), 1e-300) ** 2
    return (s1[0] * s2[1] - s2[0] * s1[1]) / scale


def _roots(fun, lo, hi, step, count):
    roots = []
    x0, f0 = lo, fun(lo)
    x = lo
    while len(roots) < count and x < hi:
        x = x0 + step
        f1 = fun(x)
        if f0 == 0.0:
            roots.append(x0)
        elif f0 * f1 < 0:
            roots.append(brentq(fun, x0, x, xtol=1e-14, rtol=1e-14))
        x0, f0 = x, f1
    return roots


def _scan_start(m: int) -> float:
    # every root of mode m exceeds j_{m,1} > m; roots of one mode are ~pi apart
    return max(0.5, float(m))


@lru_cache(maxsize=None)
def clamped_disk_roots(m: int, count: int = 2) -> tuple:
    """Frequencies ``k`` (``Gamma^2 = k^4``) of the clamped unit disk, mode ``m``."""
    return tuple(_roots(lambda k: _clamped_det(m, 0.0, k**4), _scan_start(m), 40.0, 0.1, count))


@lru_cache(maxsize=None)
def buckling_disk_roots(m: int, count: int = 2) -> tuple:
    """Values ``sqrt(Lambda)`` of the buckling unit disk, mode ``m``."""
    return tuple(_roots(lambda s: _clamped_det(m, s * s, 0.0), _scan_start(m), 40.0, 0.1,
                        count))


def bsteklov1_disk_mode(m: int) -> float:
    """``eta`` for mode ``m``: ``f(1) = 0`` and ``Lf(1) = eta f'(1)``."""
    s1, s2 = _shoot(m, 0.0, 0.0)
    # combination with f(1) = 0
    c1, c2 = s2[0], -s1[0]
    f = c1 * s1 + c2 * s2
    return float(f[2] / f[1])


def bsteklov2_disk_mode(m: int) -> float:
    """``xi`` for mode ``m``: ``f'(1) = 0`` and ``(Lf)'(1) + xi f(1) = 0``."""
    if m == 0:
        return 0.0
    s1, s2 = _shoot(m, 0.0, 0.0)
    c1, c2 = s2[1], -s1[1]
    f = c1 * s1 + c2 * s2
    return float(-f[3] / f[0])


def disk_clamped(k: int, radius: float = 1.0) -> np.ndarray:
    """Clamped plate quotients ``Gamma^2`` of a disk."""
    pairs = []
    for m in range(k + 1):
        for kr in clamped_disk_roots(m, 2):
            pairs.append((kr**4 / radius**4, 1 if m == 0 else 2))
    return _with_multiplicity(pairs, k)


def disk_buckling(k: int, radius: float = 1.0) -> np.ndarray:
    pairs = []
    for m in range(k + 1):
        for s in buckling_disk_roots(m, 2):
            pairs.append((s * s / radius**2, 1 if m == 0 else 2))
    return _with_multiplicity(pairs, k)


def disk_bsteklov1(k: int, radius: float = 1.0) -> np.ndarray:
    pairs = [(bsteklov1_disk_mode(m) / radius, 1 if m == 0 else 2) for m in range(k + 1)]
    return _with_multiplicity(pairs, k)


def disk_bsteklov2(k: int, radius: float = 1.0) -> np.ndarray:
    pairs = [(bsteklov2_disk_mode(m) / radius**3, 1 if m == 0 else 2) for m in range(k + 1)]
    return _with_multiplicity(pairs, k)


def disk_reference(problem: str, k: int, radius: float = 1.0) -> np.ndarray:
    table = {
        "dirichlet": disk_dirichlet, "neumann": disk_neumann, "steklov": disk_steklov,
        "bsteklov1": disk_bsteklov1, "bsteklov2": disk_bsteklov2,
        "buckling": disk_buckling, "clamped": disk_clamped,
    }
    return table[problem](k, radius)


def rectangle_reference(problem: str, k: int, width: float, height: float):
    if problem == "dirichlet":
        return rectangle_dirichlet(k, width, height)
    if problem == "neumann":
        return rectangle_neumann(k, width, height)
    return None
