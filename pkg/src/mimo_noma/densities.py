"""Eigenvalue densities of matrix-F and Wishart ensembles.

Finite-size densities are built in exact rational arithmetic and stored as

    p(lambda) = sum_k c_k lambda**k / (1 + lambda)**E        (matrix F)
    p(lambda) = sum_k c_k (q lambda)**k exp(-q lambda)        (Wishart)

so normalizers and CDFs have closed forms. Matrix F means
``Y^(1/2) X^(-1) Y^(1/2)`` with ``X ~ CW_q(m1, I)`` and ``Y ~ CW_q(m2, I)``
independent; its eigenvalues coincide with those of ``X^(-1) Y``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
import sympy as sp
from scipy import special
from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix

from .errors import DimensionError, DomainError
from .quadrature import integrate_adaptive
from .system import trial_generator

ORDERED_MAX_Q = 8
ORDERED_MAX_M = 16

_cache: dict = {}
_cache_lock = threading.Lock()


def _memoized(key, build):
    with _cache_lock:
        if key not in _cache:
            _cache[key] = build()
        return _cache[key]


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class FParams:
    """Degrees of freedom ``mu1`` (inverted factor), ``mu2`` and dimension ``nu``."""

    mu1: int
    mu2: int
    nu: int

    def __post_init__(self):
        if not (self.nu >= 1 and self.mu1 >= self.nu and self.mu2 >= self.nu):
            raise DomainError(f"need mu1, mu2 >= nu >= 1, got {self}")


def map_wishart_params(M1: int, M2: int, N: int) -> FParams:
    """Parameters of the matrix-F law of the squared shared-stream GSVs.

    Raises
    ------
    DimensionError
        If ``M1 + M2 <= N`` (no shared streams).
    """
    if M1 + M2 <= N:
        raise DimensionError(f"no shared streams when M1 + M2 <= N ({M1} + {M2} <= {N})")
    if M1 >= N and M2 >= N:
        return FParams(M1, M2, N)
    if M1 < N and M2 < N:
        return FParams(M1, M2, M1 + M2 - N)
    if M1 >= N:
        return FParams(M1 + M2 - N, N, M2)
    return FParams(N, M1 + M2 - N, M1)


# ---------------------------------------------------------------- exact helpers

def _frac(x) -> Fraction:
    """Convert a sympy ``QQ`` element (or int) to ``Fraction``."""
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return Fraction(int(x.numerator), int(x.denominator))


def _beta(a: int, b: int) -> Fraction:
    return Fraction(math.factorial(a - 1) * math.factorial(b - 1), math.factorial(a + b - 1))


def _det_qq(rows) -> Fraction:
    n = len(rows)
    if n == 0:
        return Fraction(1)
    M = DomainMatrix([[QQ(v.numerator, v.denominator) for v in row] for row in rows], (n, n), QQ)
    return _frac(M.det())


def _minor(rows, i, j):
    return [r[:j] + r[j + 1:] for k, r in enumerate(rows) if k != i]


def _poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _binom_row(n: int):
    return [Fraction(math.comb(n, k)) for k in range(n + 1)]


def _trim(c):
    c = list(c)
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return c


def _u_poly_to_lambda(a):
    """Rewrite ``sum_j a_j u**j (1 - u)**2`` with ``u = lam / (1 + lam)``.

    Returns ``(c, E)`` with the same function equal to
    ``sum_k c_k lam**k / (1 + lam)**E`` and common ``(1 + lam)`` factors
    cancelled.
    """
    a = _trim(a)
    deg = len(a) - 1
    num = [Fraction(0)] * (deg + 1)
    for j, aj in enumerate(a):
        if aj:
            for k, b in enumerate(_binom_row(deg - j)):
                num[j + k] += aj * b
    E = deg + 2
    num = _trim(num)
    # divide out (1 + lam) while lam = -1 is a root
    while E > len(num) + 1 and len(num) > 1:
        if sum(c * (-1) ** k for k, c in enumerate(num)) != 0:
            break
        quotient = [Fraction(0)] * (len(num) - 1)
        carry = Fraction(0)
        for k in range(len(num) - 1, 0, -1):
            carry = num[k] - (carry if k < len(num) - 1 else 0)
            quotient[k - 1] = carry
        num = quotient
        E -= 1
    return num, E


# ---------------------------------------------------------------- density classes

class Density:
    """Scalar pdf on ``support`` with a cached normalizer.

    Subclasses implement ``_pdf`` (normalized) and may override ``cdf``.
    ``pdf_u`` is the density of ``u = lambda / (1 + lambda)`` on [0, 1].
    """

    support: tuple = (0.0, math.inf)

    def pdf(self, lam):
        lam = np.asarray(lam, dtype=float)
        lo, hi = self.support
        inside = (lam >= lo) & (lam <= hi)
        out = np.zeros(lam.shape)
        if np.any(inside):
            out[inside] = self._pdf(lam[inside])
        return out if out.ndim else float(out)

    __call__ = pdf

    def pdf_u(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = u / (1.0 - u)
            out = np.where(u < 1.0, self.pdf(np.where(u < 1.0, lam, 0.0)) / (1.0 - u) ** 2, 0.0)
        return out if out.ndim else float(out)

    def cdf(self, lam):
        lo, hi = self.support
        f = np.vectorize(lambda x: 0.0 if x <= lo else
                         integrate_adaptive(self._scalar_pdf, lo, min(x, hi), points=self.breakpoints))
        out = f(np.asarray(lam, dtype=float))
        return out if np.ndim(out) else float(out)

    def _scalar_pdf(self, x):
        return float(self.pdf(x))

    breakpoints: tuple = ()

    def integral(self) -> float:
        """Numerical integral of the normalized pdf over its support."""
        lo, hi = self.support
        return integrate_adaptive(self._scalar_pdf, lo, hi, points=self.breakpoints,
                                  epsabs=1e-12, epsrel=1e-12)

    def expect(self, g, a: float | None = None, b: float | None = None) -> float:
        """``E[g(lambda) 1{a <= lambda <= b}]`` by adaptive quadrature."""
        lo, hi = self.support
        a = lo if a is None else max(a, lo)
        b = hi if b is None else min(b, hi)
        if b <= a:
            return 0.0
        return integrate_adaptive(lambda x: g(x) * self._scalar_pdf(x), a, b, points=self.breakpoints)


class RationalDensity(Density):
    """``p(lam) = K * sum_k c_k lam**k / (1 + lam)**E`` on ``[0, inf)``.

    ``raw`` holds the unnormalized exact coefficients ``c_k``; ``K`` is
    ``1 / normalizer``.
    """

    def __init__(self, raw, E: int, label: str = ""):
        self.raw = tuple(Fraction(c) for c in _trim(raw))
        self.E = int(E)
        self.label = label
        if self.E < len(self.raw) + 1:
            raise DomainError("density is not integrable at infinity")

    @cached_property
    def exact_normalizer(self) -> Fraction:
        E = self.E
        return sum((c * _beta(k + 1, E - k - 1) for k, c in enumerate(self.raw)), Fraction(0))

    @property
    def normalizer(self) -> float:
        return float(self.exact_normalizer)

    @cached_property
    def exact_coefficients(self):
        Z = self.exact_normalizer
        return tuple(c / Z for c in self.raw)

    @cached_property
    def coefficients(self) -> np.ndarray:
        return np.array([float(c) for c in self.exact_coefficients])

    @cached_property
    def _betas(self):
        E = self.E
        k = np.arange(len(self.raw), dtype=float)
        return k + 1.0, E - k - 1.0

    def _pdf(self, lam):
        c = self.coefficients
        K = len(c) - 1
        small = lam <= 1.0
        out = np.empty(lam.shape)
        x = lam[small]
        out[small] = np.polynomial.polynomial.polyval(x, c) / (1.0 + x) ** self.E
        t = 1.0 / lam[~small]
        # lam**k / (1+lam)**E = (lam/(1+lam))**E * t**(E-k)
        rev = np.zeros(self.E + 1)
        rev[self.E - np.arange(K + 1)] = c
        out[~small] = np.polynomial.polynomial.polyval(t, rev) / (1.0 + t) ** self.E
        return out

    def pdf_u(self, u):
        """Polynomial density in ``u``: ``sum_k c_k u**k (1 - u)**(E - k - 2)``."""
        u = np.asarray(u, dtype=float)
        c = self.coefficients
        k = np.arange(len(c))
        out = np.sum(c * u[..., None] ** k * (1.0 - u[..., None]) ** (self.E - k - 2), axis=-1)
        return out if out.ndim else float(out)

    def cdf(self, lam):
        lam = np.asarray(lam, dtype=float)
        u = np.clip(lam / (1.0 + lam), 0.0, 1.0)
        u = np.where(np.isinf(lam), 1.0, u)
        a, b = self._betas
        weights = self.coefficients * special.beta(a, b)
        out = np.sum(weights * special.betainc(a, b, u[..., None]), axis=-1)
        return out if out.ndim else float(out)

    def sf(self, lam):
        lam = np.asarray(lam, dtype=float)
        u = np.clip(lam / (1.0 + lam), 0.0, 1.0)
        a, b = self._betas
        weights = self.coefficients * special.beta(a, b)
        out = np.sum(weights * special.betaincc(a, b, u[..., None]), axis=-1)
        return out if out.ndim else float(out)

    def mean(self) -> float:
        E = self.E
        if E < len(self.raw) + 2:
            return math.inf
        return float(sum(c * _beta(k + 2, E - k - 2) for k, c in enumerate(self.exact_coefficients)))

    def as_sympy(self, symbol=None):
        """Normalized closed form as a sympy expression."""
        x = symbol if symbol is not None else sp.Symbol("lambda", nonnegative=True)
        num = sum(sp.Rational(c.numerator, c.denominator) * x**k for k, c in enumerate(self.exact_coefficients))
        return sp.factor(num) / (1 + x) ** self.E


class GammaSeriesDensity(Density):
    """``p(lam) = K * sum_k c_k (q lam)**k exp(-q lam)`` on ``[0, inf)``."""

    def __init__(self, raw, q: int, label: str = ""):
        self.raw = tuple(Fraction(c) for c in _trim(raw))
        self.q = int(q)
        self.label = label

    @cached_property
    def exact_normalizer(self) -> Fraction:
        return sum((c * math.factorial(k) for k, c in enumerate(self.raw)), Fraction(0)) / self.q

    @property
    def normalizer(self) -> float:
        return float(self.exact_normalizer)

    @cached_property
    def coefficients(self) -> np.ndarray:
        Z = self.exact_normalizer
        return np.array([float(c / Z) for c in self.raw])

    def _pdf(self, lam):
        y = self.q * lam
        k = np.arange(len(self.coefficients))
        with np.errstate(divide="ignore", invalid="ignore"):
            logy = np.log(y)[..., None]
            terms = np.where(k == 0, np.exp(-y)[..., None], np.exp(k * logy - y[..., None]))
        return np.sum(self.coefficients * terms, axis=-1)

    def cdf(self, lam):
        lam = np.asarray(lam, dtype=float)
        k = np.arange(len(self.coefficients))
        gam = np.array([math.factorial(int(j)) for j in k], dtype=float) / self.q
        y = np.maximum(self.q * lam, 0.0)
        out = np.sum(self.coefficients * gam * special.gammainc(k + 1, y[..., None]), axis=-1)
        return out if out.ndim else float(out)

    def mean(self) -> float:
        c = self.coefficients
        return float(sum(ck * math.factorial(k + 1) / self.q**2 for k, ck in enumerate(c)))


class ArcDensity(Density):
    """Square-root-edge density ``scale * sqrt((lam - lo)(hi - lam)) / denom(lam)``.

    Used for the large-dimension approximations; the normalizer is computed
    by quadrature.
    """

    def __init__(self, lo: float, hi: float, scale: float, denom, label: str = ""):
        self.support = (float(lo), float(hi))
        self.scale = scale
        self.denom = denom
        self.label = label

    def _raw(self, lam):
        lo, hi = self.support
        return self.scale * np.sqrt(np.maximum((lam - lo) * (hi - lam), 0.0)) / self.denom(lam)

    @cached_property
    def normalizer(self) -> float:
        lo, hi = self.support
        return integrate_adaptive(lambda x: float(self._raw(np.float64(x))), lo, hi, epsabs=1e-13, epsrel=1e-12)

    def _pdf(self, lam):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._raw(lam) / self.normalizer
        return np.where(np.isfinite(out), out, np.inf)

    @cached_property
    def _cdf_table(self):
        # lam = lo + (hi - lo)(1 - cos t) / 2 removes both square-root edges
        lo, hi = self.support
        t = np.linspace(0.0, math.pi, 20001)
        half = 0.5 * (hi - lo)
        lam = lo + half * (1.0 - np.cos(t))
        with np.errstate(divide="ignore", invalid="ignore"):
            g = self.scale * (half * np.sin(t)) ** 2 / self.denom(lam)
        g = np.where(np.isfinite(g), g, 0.0)
        c = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(t))])
        return t, c / c[-1]

    def cdf(self, lam):
        """Tabulated on a 20001-point grid in the edge-regularizing angle."""
        lo, hi = self.support
        x = np.clip(np.asarray(lam, dtype=float), lo, hi)
        theta = np.arccos(np.clip(1.0 - 2.0 * (x - lo) / (hi - lo), -1.0, 1.0))
        t, c = self._cdf_table
        out = np.interp(theta, t, c)
        return out if out.ndim else float(out)


# ---------------------------------------------------------------- matrix F, marginal

def _check_f(m1, m2, q):
    if q < 1 or m1 < q or m2 < q:
        raise DomainError(f"need m1, m2 >= q >= 1, got ({m1}, {m2}, {q})")


def _alpha(i, j, m, n):
    if i < m and j < n:
        return i + j - 2
    if i >= m and j >= n:
        return i + j
    return i + j - 1


def f_marginal_pdf(m1: int, m2: int, q: int) -> RationalDensity:
    """Marginal (unordered) eigenvalue density of the matrix-F ensemble.

    The numerator is a signed sum of ``(q-1) x (q-1)`` Beta-function minors.

    Raises
    ------
    DomainError
        If ``m1 < q`` or ``m2 < q``.
    """
    _check_f(m1, m2, q)
    return _memoized(("f_marginal", m1, m2, q), lambda: _build_f_marginal(m1, m2, q))


def _build_f_marginal(m1, m2, q):
    a = m2 - q
    raw = [Fraction(0)] * (2 * q - 1 + a)
    for m in range(1, q + 1):
        for n in range(1, q + 1):
            rows = [[_beta(a + _alpha(i, j, m, n) + 1, m1 + q - _alpha(i, j, m, n) - 1)
                     for j in range(1, q)] for i in range(1, q)]
            raw[m + n - 2 + a] += (-1) ** (m + n) * _det_qq(rows)
    return RationalDensity(raw, m1 + m2, label=f"F-marginal({m1},{m2},{q})")


# ---------------------------------------------------------------- matrix F, ordered

def _ordered_cdf_generating(m1, m2, q):
    """Coefficients in ``s`` of ``det(A(x) + s (G - A(x))) / det G``.

    ``A_ij(x) = int_0^x u**(i+j+a) (1-u)**b du`` is the Gram matrix of the
    Jacobi weight restricted to ``[0, x]`` in ``u = lam / (1 + lam)``.
    Coefficient ``k`` is the probability (as a polynomial in ``x``) that
    exactly ``k`` eigenvalues exceed ``x``.
    """
    a, b = m2 - q, m1 - q
    x, s = sp.symbols("x s")
    R = QQ[x, s]
    X, S = R.gens

    def partial(k):
        return sum((R(QQ((-1) ** j * math.comb(b, j), k + j + 1)) * X ** (k + j + 1) for j in range(b + 1)), R.zero)

    def full(k):
        return sum((QQ((-1) ** j * math.comb(b, j), k + j + 1) for j in range(b + 1)), QQ.zero)

    rows = [[partial(i + j + a) * (1 - S) + S * R(full(i + j + a)) for j in range(q)] for i in range(q)]
    D = DomainMatrix(rows, (q, q), R).det()
    det_g = _frac(DomainMatrix([[full(i + j + a) for j in range(q)] for i in range(q)], (q, q), QQ).det())
    by_s = [dict() for _ in range(q + 1)]
    for (ex, es), coeff in D.terms():
        by_s[es][ex] = by_s[es].get(ex, Fraction(0)) + _frac(coeff) / det_g
    return by_s


def _ordered_family(m1, m2, q):
    by_s = _ordered_cdf_generating(m1, m2, q)
    out = []
    cdf = {}
    for l in range(1, q + 1):
        for ex, c in by_s[l - 1].items():
            cdf[ex] = cdf.get(ex, Fraction(0)) + c
        deg = max(cdf) if cdf else 0
        deriv = [Fraction(0)] * max(deg, 1)
        for ex, c in cdf.items():
            if ex:
                deriv[ex - 1] += ex * c
        raw, E = _u_poly_to_lambda(deriv)
        out.append(RationalDensity(raw, E, label=f"F-ordered({l};{m1},{m2},{q})"))
    return tuple(out)


def f_ordered_pdf(l: int, m1: int, m2: int, q: int) -> RationalDensity:
    """Density of the ``l``-th largest eigenvalue of the matrix-F ensemble.

    Built from the exact distribution of the number of eigenvalues above a
    threshold, then differentiated. Limited to ``q <= 8`` and ``m1, m2 <= 16``.

    Raises
    ------
    DomainError
        If ``l`` is outside ``1..q``, the degrees of freedom are too small,
        or the size cap is exceeded.
    """
    _check_f(m1, m2, q)
    if not 1 <= l <= q:
        raise DomainError(f"order index l must lie in 1..{q}, got {l}")
    if q > ORDERED_MAX_Q or max(m1, m2) > ORDERED_MAX_M:
        raise DomainError(f"ordered densities are limited to q <= {ORDERED_MAX_Q} and m1, m2 <= {ORDERED_MAX_M}")
    family = _memoized(("f_ordered", m1, m2, q), lambda: _ordered_family(m1, m2, q))
    return family[l - 1]


# ---------------------------------------------------------------- Wishart

def wishart_marginal_pdf(p: int, q: int) -> GammaSeriesDensity:
    """Marginal eigenvalue density of ``CW_q(p, I / q)``.

    Raises
    ------
    DomainError
        If ``p < q``.
    """
    if q < 1 or p < q:
        raise DomainError(f"need p >= q >= 1, got p={p}, q={q}")
    return _memoized(("wishart", p, q), lambda: _build_wishart(p, q))


def _build_wishart(p, q):
    raw = [Fraction(0)] * (2 * q - 1 + p - q)
    for m in range(1, q + 1):
        for n in range(1, q + 1):
            rows = [[Fraction(math.factorial(_alpha(i, j, m, n) + p - q)) for j in range(1, q)] for i in range(1, q)]
            raw[m + n - 2 + p - q] += (-1) ** (m + n) * _det_qq(rows)
    return GammaSeriesDensity(raw, q, label=f"Wishart({p},{q})")


# ---------------------------------------------------------------- large-dimension approximations

def f_support_edges(rho1: float, rho2: float):
    h = math.sqrt(1.0 - (1.0 - rho1) * (1.0 - rho2))
    c = rho1 / rho2 / (1.0 - rho1) ** 2
    return c * (1.0 - h) ** 2, c * (1.0 + h) ** 2


def f_marginal_asymptotic(rho1: float, rho2: float) -> ArcDensity:
    """Large-dimension approximation of the matrix-F marginal density.

    ``rho1 = q / m1`` and ``rho2 = q / m2``. The support edges are
    ``(rho1 / rho2) (1 -+ h)**2 / (1 - rho1)**2`` with
    ``h = sqrt(1 - (1 - rho1)(1 - rho2))``.

    Raises
    ------
    DomainError
        Unless ``0 < rho1 < 1`` and ``0 < rho2 <= 1``.
    """
    if not (0.0 < rho1 < 1.0 and 0.0 < rho2 <= 1.0):
        raise DomainError(f"need 0 < rho1 < 1 and 0 < rho2 <= 1, got {rho1}, {rho2}")
    lo, hi = f_support_edges(rho1, rho2)
    return ArcDensity(lo, hi, (1.0 - rho1) / (2.0 * math.pi * rho1),
                      lambda x: x * (1.0 + x), label=f"F-asymptotic({rho1},{rho2})")


def wishart_marginal_asymptotic(xi: float, p: float) -> ArcDensity:
    """Marchenko-Pastur approximation on ``[p (1 - sqrt(xi))**2, p (1 + sqrt(xi))**2]``.

    The support corresponds to eigenvalues of an unscaled ``CW_q(p, I)``
    matrix with ``xi = q / p``.
    """
    if not 0.0 < xi <= 1.0 or p <= 0:
        raise DomainError(f"need 0 < xi <= 1 and p > 0, got xi={xi}, p={p}")
    r = math.sqrt(xi)
    return ArcDensity(p * (1.0 - r) ** 2, p * (1.0 + r) ** 2, 1.0 / (2.0 * math.pi * xi * p),
                      lambda x: x, label=f"MP({xi},{p})")


# ---------------------------------------------------------------- sampling oracles

def _complex_normal(rng, shape):
    z = rng.standard_normal((2, *shape))
    return (z[0] + 1j * z[1]) * math.sqrt(0.5)


def sample_f_eigenvalues(m1: int, m2: int, q: int, trials: int, seed: int, chunk: int = 20000) -> np.ndarray:
    """Eigenvalues of sampled matrix-F draws, one row per trial, sorted descending."""
    _check_f(m1, m2, q)
    out = np.empty((trials, q))
    for block, start in enumerate(range(0, trials, chunk)):
        n = min(chunk, trials - start)
        rng = trial_generator(seed, block)
        G1 = _complex_normal(rng, (n, q, m1))
        G2 = _complex_normal(rng, (n, q, m2))
        W1 = G1 @ np.conj(np.swapaxes(G1, -1, -2))
        W2 = G2 @ np.conj(np.swapaxes(G2, -1, -2))
        Linv = np.linalg.inv(np.linalg.cholesky(W1))
        C = Linv @ W2 @ np.conj(np.swapaxes(Linv, -1, -2))
        out[start:start + n] = np.linalg.eigvalsh(C)[:, ::-1]
    return out


def sample_wishart_eigenvalues(p: int, q: int, trials: int, seed: int, chunk: int = 20000) -> np.ndarray:
    """Eigenvalues of ``CW_q(p, I / q)`` draws, sorted descending per row."""
    if q < 1 or p < q:
        raise DomainError(f"need p >= q >= 1, got p={p}, q={q}")
    out = np.empty((trials, q))
    for block, start in enumerate(range(0, trials, chunk)):
        n = min(chunk, trials - start)
        G = _complex_normal(trial_generator(seed, block), (n, q, p))
        W = G @ np.conj(np.swapaxes(G, -1, -2)) / q
        out[start:start + n] = np.linalg.eigvalsh(W)[:, ::-1]
    return out


def ks_distance(samples: np.ndarray, cdf) -> float:
    """Kolmogorov-Smirnov statistic of ``samples`` against a vectorized ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - F
    lower = F - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))
