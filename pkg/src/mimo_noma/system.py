"""Two-user downlink configuration, stream bookkeeping and channel sampling.

Powers are linear watts everywhere in this module; dBm only appears in the
conversion helpers used at the configuration boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionError, DomainError, InfinitePower

RANK_RTOL = 1e-12


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * np.log10(watt) + 30.0


@dataclass(frozen=True)
class DerivedDims:
    """Stream partition of a configuration.

    Attributes
    ----------
    L : int
        Number of transmitted symbols, ``min(M1 + M2, N)``.
    Mbar1, Mbar2 : int
        Private streams of user 1 and user 2.
    M : int
        Streams shared by both users through superposition coding.
    """

    L: int
    Mbar1: int
    Mbar2: int
    M: int


def derive_dims(N: int, M1: int, M2: int) -> DerivedDims:
    if min(N, M1, M2) < 1:
        raise DimensionError(f"antenna counts must be positive, got N={N}, M1={M1}, M2={M2}")
    L = min(M1 + M2, N)
    Mbar1 = min(M1, max(0, N - M2))
    Mbar2 = min(M2, max(0, N - M1))
    M = N - Mbar1 - Mbar2 if M1 + M2 > N else 0
    return DerivedDims(L=L, Mbar1=Mbar1, Mbar2=Mbar2, M=M)


@dataclass(frozen=True)
class SystemConfig:
    """Antenna counts, path losses, noise power and power budget.

    ``Pi1`` and ``Pi2`` are the path-loss factors of the far and the near
    user; the received signal of user k is scaled by ``1/sqrt(Pik)``.
    ``Pi1 == Pi2`` is accepted so that equal-distance scenarios can be
    studied.
    """

    N: int
    M1: int
    M2: int
    Pi1: float = 1e4
    Pi2: float = 1e2
    sigma2: float = dbm_to_watt(-35.0)
    Pmax: float = dbm_to_watt(20.0)

    def __post_init__(self):
        for name in ("N", "M1", "M2"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise DimensionError(f"{name} must be a positive integer, got {value!r}")
        if not (self.Pi2 > 0 and self.Pi1 >= self.Pi2):
            raise DomainError(f"need Pi1 >= Pi2 > 0, got Pi1={self.Pi1}, Pi2={self.Pi2}")
        if not self.sigma2 > 0:
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")
        if not self.Pmax >= 0:
            raise DomainError(f"Pmax must be nonnegative, got {self.Pmax}")

    @cached_property
    def dims(self) -> DerivedDims:
        return derive_dims(self.N, self.M1, self.M2)

    @property
    def overloaded(self) -> bool:
        """True when the users have more antennas in total than the BS."""
        return self.M1 + self.M2 > self.N

    @property
    def Pi(self) -> float:
        """Path-loss ratio of the far user to the near user."""
        return self.Pi1 / self.Pi2

    @classmethod
    def from_distances(cls, N, M1, M2, d1_m=100.0, d2_m=10.0, sigma2_dbm=-35.0, pmax_dbm=20.0):
        """Free-space path loss, ``Pik = dk**2``."""
        return cls(N=N, M1=M1, M2=M2, Pi1=float(d1_m) ** 2, Pi2=float(d2_m) ** 2,
                   sigma2=dbm_to_watt(sigma2_dbm), Pmax=dbm_to_watt(pmax_dbm))

    def replace(self, **changes) -> "SystemConfig":
        values = {k: getattr(self, k) for k in ("N", "M1", "M2", "Pi1", "Pi2", "sigma2", "Pmax")}
        values.update(changes)
        return SystemConfig(**values)


@dataclass(frozen=True)
class PowerAllocation:
    """Per-symbol power split.

    EPA gives every symbol the power ``P`` and splits it as ``P1 + P2`` on
    shared streams. UPA gives shared stream ``l`` the powers ``p1l[l]`` and
    ``p2l[l]``, every private stream of user 1 the power ``p1`` and every
    private stream of user 2 the power ``p2``.
    """

    mode: str
    P: float = 0.0
    P1: float = 0.0
    P2: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    p1l: tuple = field(default_factory=tuple)
    p2l: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.mode not in ("epa", "upa"):
            raise DomainError(f"unknown power mode {self.mode!r}")
        values = [self.P, self.P1, self.P2, self.p1, self.p2, *self.p1l, *self.p2l]
        if any(not np.isfinite(v) or v < 0 for v in values):
            raise DomainError("powers must be finite and nonnegative")
        if len(self.p1l) != len(self.p2l):
            raise DimensionError("p1l and p2l must have equal length")
        if self.mode == "epa" and abs(self.P1 + self.P2 - self.P) > 1e-12 * max(self.P, 1e-300):
            raise DomainError(f"EPA split must satisfy P1 + P2 = P, got {self.P1} + {self.P2} != {self.P}")

    @classmethod
    def epa(cls, P: float, fraction1: float = 0.5) -> "PowerAllocation":
        """EPA with a share ``fraction1`` of ``P`` given to user 1 on shared streams."""
        if not 0.0 <= fraction1 <= 1.0:
            raise DomainError(f"fraction1 must lie in [0, 1], got {fraction1}")
        P1 = fraction1 * P
        return cls(mode="epa", P=P, P1=P1, P2=P - P1)

    @classmethod
    def upa(cls, p1: float, p2: float, p1l, p2l) -> "PowerAllocation":
        return cls(mode="upa", p1=float(p1), p2=float(p2),
                   p1l=tuple(float(v) for v in p1l), p2l=tuple(float(v) for v in p2l))

    def as_upa(self, dims: DerivedDims) -> "PowerAllocation":
        if self.mode == "upa":
            return self
        return PowerAllocation.upa(self.P, self.P, [self.P1] * dims.M, [self.P2] * dims.M)

    def stream_powers(self, dims: DerivedDims):
        """Per-symbol powers ``(p1, p2)`` in the order shared, private 1, private 2.

        Powers that would reach the other user's private streams are zeroed.
        """
        u = self.as_upa(dims)
        if len(u.p1l) != dims.M:
            raise DimensionError(f"allocation has {len(u.p1l)} shared streams, dims need {dims.M}")
        p1 = np.concatenate([u.p1l, np.full(dims.Mbar1, u.p1), np.zeros(dims.Mbar2)])
        p2 = np.concatenate([u.p2l, np.zeros(dims.Mbar1), np.full(dims.Mbar2, u.p2)])
        return p1, p2


def transmit_power_gsvd(P: float, config: SystemConfig) -> float:
    """Average transmit power of GSVD precoding with power ``P`` per symbol."""
    excess = config.M1 + config.M2 - config.N
    if excess == 0:
        raise InfinitePower("GSVD precoding needs unbounded power when M1 + M2 = N")
    return P * config.dims.L / abs(excess)


def _upa_coefficients(config: SystemConfig):
    """Weights of (sum of shared powers, p1, p2) in the average transmit power."""
    d = config.dims
    M1, M2, N = config.M1, config.M2, config.N
    if M1 + M2 <= N:
        return 0.0, 1.0, 1.0
    if M1 >= N:
        excess = M1 + M2 - N
        return 1.0 / excess, d.Mbar1 / excess, d.Mbar2 / excess
    return M1 / (N * d.M), d.Mbar1 / d.M, 1.0


def transmit_power_upa(alloc: PowerAllocation, config: SystemConfig) -> float:
    """Average transmit power of UA-SD precoding, linear in every power."""
    u = alloc.as_upa(config.dims)
    shared, w1, w2 = _upa_coefficients(config)
    return shared * (sum(u.p1l) + sum(u.p2l)) + w1 * u.p1 + w2 * u.p2


def transmit_power_epa(P: float, config: SystemConfig) -> float:
    """Average transmit power of UA-SD precoding when every symbol gets ``P``."""
    M1, M2, N = config.M1, config.M2, config.N
    if M1 + M2 <= N:
        return 2.0 * P
    if M1 >= N:
        return P * N / (M1 + M2 - N)
    d = config.dims
    return P * (M1 / N + d.Mbar1 / d.M + 1.0)


def budget_weights(config: SystemConfig):
    """Weights ``a`` with ``transmit power = a @ [p1l..., p2l..., p1, p2]``."""
    d = config.dims
    shared, w1, w2 = _upa_coefficients(config)
    return np.concatenate([np.full(2 * d.M, shared), [w1, w2]])


def epa_power_for_budget(config: SystemConfig, budget: float | None = None) -> float:
    """Per-symbol power ``P`` that spends ``budget`` (default ``Pmax``)."""
    budget = config.Pmax if budget is None else budget
    return budget / transmit_power_epa(1.0, config)


def gsvd_power_for_budget(config: SystemConfig, budget: float | None = None) -> float:
    budget = config.Pmax if budget is None else budget
    return budget / transmit_power_gsvd(1.0, config)


@dataclass(frozen=True)
class ChannelPair:
    """One small-scale fading draw; path loss is applied separately."""

    H1: np.ndarray
    H2: np.ndarray

    def __post_init__(self):
        if self.H1.ndim != 2 or self.H2.ndim != 2 or self.H1.shape[1] != self.H2.shape[1]:
            raise DimensionError(f"incompatible channel shapes {self.H1.shape} and {self.H2.shape}")
        self.H1.setflags(write=False)
        self.H2.setflags(write=False)


def trial_generator(seed: int, index: int = 0, attempt: int = 0) -> np.random.Generator:
    """Counter-based stream keyed by ``seed`` and positioned by ``(index, attempt)``.

    The trial index occupies the top counter word, so streams of different
    trials never overlap and any single trial can be regenerated alone.
    """
    if seed < 0 or index < 0:
        raise DomainError("seed and index must be nonnegative")
    counter = [0, 0, attempt, index]
    return np.random.Generator(np.random.Philox(key=int(seed), counter=counter))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """I.i.d. CN(0, 1) entries."""
    z = rng.standard_normal((2, *shape))
    return (z[0] + 1j * z[1]) * np.sqrt(0.5)


def is_well_ranked(H: np.ndarray, rtol: float = RANK_RTOL) -> bool:
    s = np.linalg.svd(H, compute_uv=False)
    return s[-1] >= rtol * s[0]


def sample_channel(config: SystemConfig, seed: int, index: int = 0) -> ChannelPair:
    """Draw trial ``index`` of the fading sequence identified by ``seed``.

    Draws whose smallest singular value falls below ``1e-12`` of the largest
    are redrawn from the next attempt counter.
    """
    for attempt in range(64):
        rng = trial_generator(seed, index, attempt)
        H1 = complex_gaussian(rng, (config.M1, config.N))
        H2 = complex_gaussian(rng, (config.M2, config.N))
        if is_well_ranked(H1) and is_well_ranked(H2):
            return ChannelPair(H1, H2)
    raise RuntimeError("could not draw a full-rank channel")  # pragma: no cover


def sample_channels(config: SystemConfig, seed: int, count: int, start: int = 0):
    """Iterate over trials ``start .. start + count - 1``."""
    for index in range(start, start + count):
        yield sample_channel(config, seed, index)
