"""Per-realization and ergodic achievable rates.

Shared-stream integrals against matrix-F densities are evaluated in
``u = lambda / (1 + lambda)``, where ``[Sigma2]^2 = u`` and
``[Sigma1]^2 = 1 - u``. The user-1 rate switches from the rate at user 2 to
the rate at user 1 at ``lambda = 1 / Pi``, that is ``u = 1 / (1 + Pi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import optimize

from .decompositions import GsvdDecomposition, UasdDecomposition
from .densities import (FParams, f_marginal_pdf, f_ordered_pdf, map_wishart_params,
                        wishart_marginal_pdf)
from .errors import DimensionError, DomainError
from .quadrature import composite_rule, integrate_adaptive
from .system import PowerAllocation, SystemConfig

LOG2E = 1.0 / math.log(2.0)


def _log2p(x):
    return np.log1p(x) * LOG2E


@dataclass(frozen=True)
class RateBreakdown:
    """Rates in bits per channel use for one channel realization.

    ``r1_shared`` applies the min rule to ``r1_at_user1`` and ``r1_at_user2``.
    """

    r1_shared: np.ndarray
    r1_private: np.ndarray
    r2_shared: np.ndarray
    r2_private: np.ndarray
    r1_at_user1: np.ndarray
    r1_at_user2: np.ndarray

    @property
    def R1(self) -> float:
        return float(np.sum(self.r1_shared) + np.sum(self.r1_private))

    @property
    def R2(self) -> float:
        return float(np.sum(self.r2_shared) + np.sum(self.r2_private))


def instantaneous_rates(decomp: UasdDecomposition, alloc: PowerAllocation, config: SystemConfig) -> RateBreakdown:
    """Achievable rates of one realization under UA-SD precoding.

    User 2 decodes the user-1 part of every shared stream first, so the
    user-1 shared rate is the smaller of the rates supported at both users.
    """
    d = config.dims
    if decomp.dims != d:
        raise DimensionError(f"decomposition dims {decomp.dims} do not match config dims {d}")
    u = alloc.as_upa(d)
    if len(u.p1l) != d.M:
        raise DimensionError(f"allocation has {len(u.p1l)} shared streams, dims need {d.M}")
    s2 = config.sigma2
    p1l, p2l = np.asarray(u.p1l, float), np.asarray(u.p2l, float)
    g1 = decomp.Sigma1**2 / config.Pi1
    g2 = decomp.Sigma2**2 / config.Pi2
    at1 = _log2p(p1l * g1 / (s2 + p2l * g1))
    at2 = _log2p(p1l * g2 / (s2 + p2l * g2))
    r2_shared = _log2p(p2l * g2 / s2)
    r1_private = _log2p(u.p1 * decomp.D1**2 / (config.Pi1 * s2))
    r2_private = _log2p(u.p2 * decomp.D2**2 / (config.Pi2 * s2))
    return RateBreakdown(np.minimum(at1, at2), r1_private, r2_shared, r2_private, at1, at2)


def gsvd_instantaneous_rates(decomp: GsvdDecomposition, P: float, P1: float, config: SystemConfig):
    """GSVD-NOMA rates ``(R1, R2)`` of one realization with per-symbol power ``P``.

    On each shared stream the user with the larger effective gain performs
    SIC; user 1 receives ``P1`` and user 2 ``P - P1``.
    """
    d = decomp.dims
    s2 = config.sigma2
    P2 = P - P1
    g1 = decomp.c**2 / config.Pi1
    g2 = decomp.s**2 / config.Pi2
    strong2 = g2 >= g1
    r1 = np.where(strong2, _log2p(P1 * g1 / (s2 + P2 * g1)), _log2p(P1 * g1 / s2))
    r2 = np.where(strong2, _log2p(P2 * g2 / s2), _log2p(P2 * g2 / (s2 + P1 * g2)))
    # private streams have unit gain when the sum of antennas is at least N,
    # and pseudo-inverse gains (also unit) otherwise
    R1 = float(r1.sum()) + d.Mbar1 * float(_log2p(P / (config.Pi1 * s2)))
    R2 = float(r2.sum()) + d.Mbar2 * float(_log2p(P / (config.Pi2 * s2)))
    return R1, R2


# ---------------------------------------------------------------- ergodic engine

class RateModel:
    """Ergodic rates of one configuration.

    Parameters
    ----------
    config : SystemConfig
    method : {"fixed", "adaptive"}
        ``"fixed"`` integrates with a graded composite Gauss-Legendre rule whose
        density values are cached, which is what the optimizer uses.
        ``"adaptive"`` uses Gauss-Kronrod integration for every term.
    """

    def __init__(self, config: SystemConfig, method: str = "fixed"):
        if method not in ("fixed", "adaptive"):
            raise DomainError(f"unknown integration method {method!r}")
        self.config = config
        self.method = method
        self.dims = config.dims
        self.u_split = 1.0 / (1.0 + config.Pi)

    # densities
    @cached_property
    def fparams(self) -> FParams | None:
        c = self.config
        return map_wishart_params(c.M1, c.M2, c.N) if c.overloaded else None

    @cached_property
    def marginal(self):
        f = self.fparams
        return f_marginal_pdf(f.mu1, f.mu2, f.nu) if f else None

    @cached_property
    def ordered(self):
        f = self.fparams
        return [f_ordered_pdf(l, f.mu1, f.mu2, f.nu) for l in range(1, f.nu + 1)] if f else []

    @cached_property
    def wishart1(self):
        d = self.dims
        if self.config.overloaded or d.Mbar1 == 0:
            return None
        return wishart_marginal_pdf(self.config.M1, d.Mbar1)

    @cached_property
    def wishart2(self):
        d = self.dims
        return wishart_marginal_pdf(self.config.M2, d.Mbar2) if d.Mbar2 else None

    # fixed rules
    @cached_property
    def rule_low(self):
        return composite_rule(0.0, self.u_split)

    @cached_property
    def rule_high(self):
        return composite_rule(self.u_split, 1.0)

    @cached_property
    def rule_full(self):
        return composite_rule(0.0, 1.0)

    def weights(self, density, rule):
        """Quadrature weights times the density in ``u`` at the rule nodes."""
        key = (id(density), id(rule))
        cache = self.__dict__.setdefault("_weight_cache", {})
        if key not in cache:
            u, w = rule
            cache[key] = (u, w * density.pdf_u(u))
        return cache[key]

    def _expect(self, density, g, rule_name):
        """``E[g(u)]`` over the sub-interval named ``low``, ``high`` or ``full``."""
        if self.method == "adaptive":
            a, b = {"low": (0.0, self.u_split), "high": (self.u_split, 1.0), "full": (0.0, 1.0)}[rule_name]
            return integrate_adaptive(lambda u: float(g(np.float64(u))) * float(density.pdf_u(u)), a, b)
        u, w = self.weights(density, getattr(self, "rule_" + rule_name))
        return float(np.dot(w, g(u)))

    # building blocks
    def shared_user1(self, density, p1, p2) -> float:
        c, s2 = self.config, self.config.sigma2
        low = lambda u: _log2p(p1 * u / (c.Pi2 * s2 + p2 * u))
        high = lambda u: _log2p(p1 * (1.0 - u) / (c.Pi1 * s2 + p2 * (1.0 - u)))
        return self._expect(density, low, "low") + self._expect(density, high, "high")

    def shared_user2(self, density, p2) -> float:
        c = self.config
        return self._expect(density, lambda u: _log2p(p2 * u / (c.Pi2 * c.sigma2)), "full")

    def private_wishart(self, density, p, Pi) -> float:
        s2 = self.config.sigma2

        def g(u):
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(u < 1.0, _log2p(p * u / ((1.0 - u) * Pi * s2)), 0.0)
        return self._expect(density, g, "full")

    def private_terms(self, p1: float, p2: float):
        c, d = self.config, self.dims
        if c.overloaded:
            r1 = d.Mbar1 * float(_log2p(p1 / (c.Pi1 * c.sigma2)))
        else:
            r1 = d.Mbar1 * self.private_wishart(self.wishart1, p1, c.Pi1) if d.Mbar1 else 0.0
        r2 = d.Mbar2 * self.private_wishart(self.wishart2, p2, c.Pi2) if d.Mbar2 else 0.0
        return r1, r2

    # public evaluators
    def epa(self, P: float, P1: float, P2: float):
        """Ergodic ``(R1, R2)`` when every symbol carries power ``P = P1 + P2``."""
        if min(P, P1, P2) < 0 or abs(P1 + P2 - P) > 1e-12 * max(P, 1e-300):
            raise DomainError("EPA needs nonnegative P1 + P2 = P")
        r1, r2 = self.private_terms(P, P)
        M = self.dims.M
        if M:
            r1 += M * self.shared_user1(self.marginal, P1, P2)
            r2 += M * self.shared_user2(self.marginal, P2)
        return r1, r2

    def upa(self, alloc: PowerAllocation):
        """Ergodic ``(R1, R2)`` for stream-wise powers, shared streams sorted by gain."""
        u = alloc.as_upa(self.dims)
        if len(u.p1l) != self.dims.M:
            raise DimensionError(f"allocation has {len(u.p1l)} shared streams, dims need {self.dims.M}")
        r1, r2 = self.private_terms(u.p1, u.p2)
        for dens, a, b in zip(self.ordered, u.p1l, u.p2l):
            r1 += self.shared_user1(dens, a, b)
            r2 += self.shared_user2(dens, b)
        return r1, r2


def ergodic_rates_epa(config: SystemConfig, P: float, P1: float, P2: float, method: str = "adaptive"):
    """Ergodic rates ``(R1, R2)`` under equal per-symbol power."""
    return RateModel(config, method).epa(P, P1, P2)


def ergodic_rates_upa(config: SystemConfig, alloc: PowerAllocation, method: str = "adaptive"):
    """Ergodic rates ``(R1, R2)`` under stream-wise power allocation."""
    return RateModel(config, method).upa(alloc)


# ---------------------------------------------------------------- SIC restriction

def prob_inferior_sic(fparams: FParams, Pi: float) -> float:
    """Probability that a shared-stream eigenvalue lies below ``1 / Pi``."""
    if not Pi > 0:
        raise DomainError(f"Pi must be positive, got {Pi}")
    dens = f_marginal_pdf(fparams.mu1, fparams.mu2, fparams.nu)
    return float(min(max(dens.cdf(1.0 / Pi), 0.0), 1.0))


@dataclass(frozen=True)
class SicGainBound:
    """Upper bound ``M * K_U * Pr{lambda < 1 / Pi}`` and its factors."""

    bound: float
    K_U: float
    argmax: float
    probability: float
    M: int


def sic_gain_terms(config: SystemConfig, P1: float, P2: float, xatol: float = 1e-9) -> SicGainBound:
    """Factors of the bound on the user-1 rate lost by restricting SIC to user 2."""
    if not config.overloaded:
        raise DimensionError("the bound needs M1 + M2 > N")
    Pi1, s2 = config.Pi1, config.sigma2
    hi = 1.0 / config.Pi

    def rate(lam):
        t = 1.0 / (1.0 + lam)
        return float(_log2p(P1 * t / (Pi1 * s2 + P2 * t)))

    res = optimize.minimize_scalar(lambda x: -rate(x), bounds=(0.0, hi), method="bounded",
                                   options={"xatol": xatol})
    candidates = [(rate(0.0), 0.0), (rate(hi), hi), (-res.fun, float(res.x))]
    K, arg = max(candidates)
    f = map_wishart_params(config.M1, config.M2, config.N)
    prob = prob_inferior_sic(f, config.Pi)
    M = config.dims.M
    return SicGainBound(M * K * prob, K, arg, prob, M)


def sic_gain_bound(config: SystemConfig, P1: float, P2: float) -> float:
    return sic_gain_terms(config, P1, P2).bound


def sic_gain_integral(config: SystemConfig, P1: float, P2: float) -> float:
    """The tighter intermediate quantity ``M E[R_U(lambda) 1{lambda < 1 / Pi}]``."""
    f = map_wishart_params(config.M1, config.M2, config.N)
    dens = f_marginal_pdf(f.mu1, f.mu2, f.nu)
    Pi1, s2 = config.Pi1, config.sigma2
    g = lambda lam: float(_log2p(P1 / (1 + lam) / (Pi1 * s2 + P2 / (1 + lam))))
    return config.dims.M * dens.expect(g, 0.0, 1.0 / config.Pi)
