"""Quadrature rules on the reference triangle and the reference edge.

Triangle rules use barycentric coordinates and weights normalised to sum
to one, so a physical integral is ``area * sum(w * f(x_q))``.  Edge rules
live on ``[0, 1]`` with weights summing to one.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 3) barycentric, or (nq,) edge parameters
    weights: np.ndarray
    degree: int

    def __len__(self) -> int:
        return len(self.weights)


def _orbit3(a: float) -> list[tuple[float, float, float]]:
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)]


def _dunavant4() -> tuple[np.ndarray, np.ndarray]:
    s10 = np.sqrt(10.0)
    r = np.sqrt(38.0 - 44.0 * np.sqrt(2.0 / 5.0))
    a = (8.0 - s10 + r) / 18.0
    b = (8.0 - s10 - r) / 18.0
    q = np.sqrt(213125.0 - 53320.0 * s10)
    wa = (620.0 + q) / 3720.0
    wb = (620.0 - q) / 3720.0
    pts = _orbit3(a) + _orbit3(b)
    return np.array(pts), np.array([wa] * 3 + [wb] * 3)


def _conical(n: int) -> tuple[np.ndarray, np.ndarray]:
    # collapsed Gauss-Jacobi product rule, exact to degree 2n - 1
    xa, wa = roots_jacobi(n, 1.0, 0.0)
    xb, wb = roots_jacobi(n, 0.0, 0.0)
    s = (xa + 1.0) / 2.0
    t = (xb + 1.0) / 2.0
    wa = wa / 4.0
    wb = wb / 2.0
    pts, wts = [], []
    for i in range(n):
        for j in range(n):
            # s is the collapsed coordinate (Jacobi weight 1 - s)
            x = (1.0 - s[i]) * t[j]
            y = s[i]
            pts.append((1.0 - x - y, x, y))
            wts.append(wa[i] * wb[j])
    w = np.array(wts)
    return np.array(pts), w / w.sum()


@lru_cache(maxsize=None)
def triangle_rule(degree: int = 4) -> QuadratureRule:
    """Symmetric rule for degree 2 or 4, conical product rule otherwise."""
    if degree <= 1:
        pts, w = np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])
        degree = 1
    elif degree == 2:
        pts, w = np.array(_orbit3(1.0 / 6.0)), np.full(3, 1.0 / 3.0)
    elif degree <= 4:
        pts, w = _dunavant4()
        degree = 4
    else:
        n = (degree + 2) // 2
        pts, w = _conical(n)
        degree = 2 * n - 1
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w, degree)


@lru_cache(maxsize=None)
def edge_rule(degree: int = 4) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] exact to ``degree``."""
    n = max(1, (degree + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    t = (x + 1.0) / 2.0
    w = w / 2.0
    t.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(t, w, 2 * n - 1)
