"""Integration helpers on finite and semi-infinite intervals."""

from __future__ import annotations

import math
import warnings
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import QuadratureError

ABS_TOL = 1e-10
REL_TOL = 1e-8
MAX_SUBDIVISIONS = 400


def integrate_adaptive(f, a: float, b: float = math.inf, points=None,
                       epsabs: float = ABS_TOL, epsrel: float = REL_TOL) -> float:
    """Adaptive Gauss-Kronrod integral of a scalar function.

    A semi-infinite range ``[a, inf)`` is compactified with
    ``x = a + t / (1 - t)``. ``points`` are interior breakpoints in ``x``.

    Raises
    ------
    QuadratureError
        If the subdivision limit is reached before the tolerance.
    """
    if b == a:
        return 0.0
    if math.isinf(b):
        def g(t):
            if t >= 1.0:
                return 0.0
            x = a + t / (1.0 - t)
            return f(x) / (1.0 - t) ** 2
        lo, hi = 0.0, 1.0
        tpoints = None if not points else [(p - a) / (1.0 + p - a) for p in points if a < p]
        func = g
    else:
        lo, hi, func = a, b, f
        tpoints = [p for p in points if a < p < b] if points else None
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(func, lo, hi, points=tpoints or None,
                                      epsabs=epsabs, epsrel=epsrel, limit=MAX_SUBDIVISIONS)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(str(exc)) from exc
    return value


@lru_cache(maxsize=None)
def _legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def graded_breakpoints(depth: int = 14, interior: int = 8) -> np.ndarray:
    """Breakpoints on [0, 1], geometrically refined towards both ends."""
    left = 0.5 * 10.0 ** -np.arange(depth, 0, -1.0)
    mid = np.linspace(0.05, 0.95, interior + 1)
    right = 1.0 - left[::-1]
    return np.unique(np.concatenate([[0.0], left, mid, right, [1.0]]))


def composite_rule(a: float, b: float, order: int = 16, depth: int = 14, interior: int = 8):
    """Nodes and weights of a graded composite Gauss-Legendre rule on ``[a, b]``."""
    if b <= a:
        return np.zeros(0), np.zeros(0)
    edges = a + (b - a) * graded_breakpoints(depth, interior)
    x, w = _legendre(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w
    return nodes.ravel(), weights.ravel()
