"""Seeded Monte-Carlo estimators over channel realizations.

Every trial ``i`` draws its channel from the counter-based stream
``(seed, i)``, so estimates do not depend on how trials are batched.
Means use compensated summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decompositions import bd_decompose, gsvd_decompose, uasd_decompose
from .errors import NomaError
from .rates import gsvd_instantaneous_rates, instantaneous_rates
from .system import PowerAllocation, SystemConfig, sample_channel


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    count: int

    @classmethod
    def from_samples(cls, x) -> "Estimate":
        x = np.asarray(x, dtype=float)
        n = x.size
        mean = math.fsum(x) / n
        var = math.fsum((x - mean) ** 2) / (n - 1) if n > 1 else 0.0
        return cls(mean, math.sqrt(var / n), n)

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.stderr + 1e-12 * max(1.0, abs(value))


class TrialError(NomaError, RuntimeError):
    """A module error raised inside a Monte-Carlo trial."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"trial {index}: {type(cause).__name__}: {cause}")
        self.index = index
        self.cause = cause


def _trials(config, seed, trials, fn):
    out = []
    for i in range(trials):
        ch = sample_channel(config, seed, i)
        try:
            out.append(fn(ch))
        except NomaError as exc:
            raise TrialError(i, exc) from exc
    return out


def mc_uasd_rates(config: SystemConfig, alloc: PowerAllocation, trials: int, seed: int):
    """Mean instantaneous UA-SD rates ``(R1, R2)`` as :class:`Estimate` pairs."""
    def one(ch):
        r = instantaneous_rates(uasd_decompose(ch.H1, ch.H2), alloc, config)
        return r.R1, r.R2
    x = np.array(_trials(config, seed, trials, one))
    return Estimate.from_samples(x[:, 0]), Estimate.from_samples(x[:, 1])


def mc_gsvd_rates(config: SystemConfig, P: float, P1: float, trials: int, seed: int):
    """Mean GSVD-NOMA rates ``(R1, R2)``."""
    def one(ch):
        return gsvd_instantaneous_rates(gsvd_decompose(ch.H1, ch.H2), P, P1, config)
    x = np.array(_trials(config, seed, trials, one))
    return Estimate.from_samples(x[:, 0]), Estimate.from_samples(x[:, 1])


def mc_gsvd_gains(config: SystemConfig, trials: int, seed: int):
    """Shared-stream ``(c, s)`` arrays of ``trials`` GSVD draws, one row per trial."""
    cs = _trials(config, seed, trials, lambda ch: (lambda g: (g.c, g.s))(gsvd_decompose(ch.H1, ch.H2)))
    return np.array([c for c, _ in cs]), np.array([s for _, s in cs])


def mc_transmit_power(config: SystemConfig, scheme: str, alloc: PowerAllocation | None, trials: int, seed: int,
                      P: float = 1.0) -> Estimate:
    """Monte-Carlo estimate of ``E[tr(Z diag(p) Z^H)]``.

    ``scheme`` is ``"uasd"`` (using ``alloc``), ``"gsvd"`` or ``"bd"``
    (both with power ``P`` on every symbol).
    """
    d = config.dims
    if scheme == "uasd":
        p1, p2 = alloc.stream_powers(d)
        weights = p1 + p2
    else:
        weights = np.full(d.L, P)

    def one(ch):
        if scheme == "uasd":
            Z = uasd_decompose(ch.H1, ch.H2).Z
        elif scheme == "gsvd":
            Z = gsvd_decompose(ch.H1, ch.H2).Z
        elif scheme == "bd":
            Z = bd_decompose(ch.H1, ch.H2)[2]
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        return float(np.sum(np.abs(Z) ** 2, axis=0) @ weights)
    return Estimate.from_samples(_trials(config, seed, trials, one))


def waterfill(gains: np.ndarray, budget: float) -> np.ndarray:
    """Powers maximizing ``sum log(1 + p_i g_i)`` subject to ``sum p_i = budget``."""
    g = np.asarray(gains, dtype=float)
    order = np.argsort(g)[::-1]
    gs = g[order]
    p = np.zeros_like(g)
    if budget <= 0 or gs.size == 0 or gs[0] <= 0:
        return p
    inv = 1.0 / gs
    for k in range(gs.size, 0, -1):
        level = (budget + inv[:k].sum()) / k
        if level > inv[k - 1]:
            p[order[:k]] = level - inv[:k]
            break
    return p


def su_mimo_rate(H: np.ndarray, Pi: float, sigma2: float, budget: float, policy: str = "waterfilling") -> float:
    """Single-user MIMO rate with the full budget, in bits per channel use."""
    s = np.linalg.svd(H, compute_uv=False)
    g = s**2 / (Pi * sigma2)
    if policy == "waterfilling":
        p = waterfill(g, budget)
    elif policy == "equal":
        p = np.full(g.size, budget / g.size)
    else:
        raise ValueError(f"unknown power policy {policy!r}")
    return float(np.sum(np.log2(1.0 + p * g)))


def mc_su_rates(config: SystemConfig, trials: int, seed: int, policy: str = "waterfilling"):
    """Ergodic single-user rates ``(C1, C2)`` of both users at budget ``Pmax``."""
    def one(ch):
        return (su_mimo_rate(ch.H1, config.Pi1, config.sigma2, config.Pmax, policy),
                su_mimo_rate(ch.H2, config.Pi2, config.sigma2, config.Pmax, policy))
    x = np.array(_trials(config, seed, trials, one))
    return Estimate.from_samples(x[:, 0]), Estimate.from_samples(x[:, 1])


def mc_f_eigenvalues(config: SystemConfig, trials: int, seed: int) -> np.ndarray:
    """Squared shared-stream GSVs ``lambda_l`` (descending) of sampled channels."""
    return np.array(_trials(config, seed, trials, lambda ch: uasd_decompose(ch.H1, ch.H2).lam))
