"""Ordered matrix-F eigenvalue density through hypergeometric tail integrals.

This is an independent, slower evaluation route used to cross-check the
exact polynomial densities. The joint eigenvalue density is a product of two
Vandermonde-type determinants; integrating the ``l - 1`` larger eigenvalues
over ``(x, inf)`` and the ``q - l`` smaller ones over ``(0, x)`` and
expanding both determinants gives a signed sum over ordered index tuples.
"""

from __future__ import annotations

from itertools import permutations

import mpmath as mp

from .errors import DomainError


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def lower_integral(c: int, s: int, x):
    """``int_0^x t**(c-1) (1+t)**(-s) dt`` as ``x**c / c * 2F1(s, c; c+1; -x)``."""
    return x**c / c * mp.hyp2f1(s, c, c + 1, -x)


def incomplete_beta(z, a: int, b: int):
    """``B(z; a, b) = z**a / a * 2F1(a, 1-b; a+1; z)``, valid for negative ``z``."""
    return z**a / a * mp.hyp2f1(a, 1 - b, a + 1, z)


def upper_integral(c: int, s: int, x):
    """``int_x^inf t**(c-1) (1+t)**(-s) dt`` via the incomplete Beta function at ``-1/x``."""
    return (-1) ** (c - s) * incomplete_beta(-1 / x, s - c, 1 - s)


def ordered_pdf_unnormalized(l: int, m1: int, m2: int, q: int, x, dps: int = 40):
    """Unnormalized density of the ``l``-th largest eigenvalue at ``x > 0``."""
    if not (1 <= l <= q and m1 >= q and m2 >= q):
        raise DomainError("invalid ordered-density parameters")
    a, s = m2 - q, m1 + m2
    with mp.workdps(dps):
        x = mp.mpf(x)
        idx = range(1, q + 1)
        total = mp.mpf(0)
        upper_cache, lower_cache = {}, {}

        def up(n, m):
            key = n + m
            if key not in upper_cache:
                upper_cache[key] = upper_integral(n + m - 1 + a, s, x)
            return upper_cache[key]

        def low(n, m):
            key = n + m
            if key not in lower_cache:
                lower_cache[key] = lower_integral(n + m - 1 + a, s, x)
            return lower_cache[key]

        for rows in permutations(idx, l):
            rest_r = [i for i in idx if i not in rows]
            sr = _perm_sign(list(rows) + rest_r)
            for cols in permutations(idx, l):
                rest_c = [j for j in idx if j not in cols]
                sc = _perm_sign(list(cols) + rest_c)
                term = x ** (rows[-1] + cols[-1] - 2 + a) / (1 + x) ** s
                for n, m in zip(rows[:-1], cols[:-1]):
                    term *= up(n, m)
                if rest_r:
                    term *= mp.det(mp.matrix([[low(i, j) for j in rest_c] for i in rest_r]))
                total += sr * sc * term
        return total


def ordered_pdf(l: int, m1: int, m2: int, q: int, xs, dps: int = 40):
    """Density values at ``xs``, normalized by numerical quadrature."""
    with mp.workdps(dps):
        f = lambda t: ordered_pdf_unnormalized(l, m1, m2, q, t, dps) if t > 0 else mp.mpf(0)
        Z = mp.quad(f, [0, 1, mp.inf])
        return [float(f(x) / Z) for x in xs]
