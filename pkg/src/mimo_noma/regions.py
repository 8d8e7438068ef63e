"""Ergodic rate regions and their convex frontiers.

A region is stored as the raw rate pairs of a sweep together with the
upper-right concave frontier of those pairs and their projections on the
axes, which is the boundary reachable by time sharing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .allocation import AllocationProblem, ccp_allocate
from .errors import MaxIterations
from .montecarlo import mc_gsvd_gains, mc_su_rates
from .rates import LOG2E, RateModel
from .system import SystemConfig, epa_power_for_budget, gsvd_power_for_budget


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def upper_frontier(points) -> list[tuple[float, float]]:
    """Concave frontier of ``points`` joined with ``(0, max R2)`` and ``(max R1, 0)``.

    Returned vertices are sorted by R1.
    """
    pts = [(float(a), float(b)) for a, b in points]
    if not pts:
        return [(0.0, 0.0)]
    r1max = max(p[0] for p in pts)
    r2max = max(p[1] for p in pts)
    cand = sorted(set(pts + [(0.0, r2max), (r1max, 0.0)]))
    hull: list[tuple[float, float]] = []
    for p in cand:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) >= 0:
            hull.pop()
        hull.append(p)
    # drop the part left of the top-left corner
    start = max(i for i, p in enumerate(hull) if p[0] == 0.0)
    return hull[start:]


@dataclass(frozen=True)
class RateRegion:
    """Rate pairs of one scheme in bits per channel use."""

    scheme: str
    points: tuple
    hull: tuple = field(init=False)

    def __post_init__(self):
        pts = tuple(sorted((float(a), float(b)) for a, b in self.points))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "hull", tuple(upper_frontier(pts)))

    @property
    def max_r1(self) -> float:
        return self.hull[-1][0]

    @property
    def max_r2(self) -> float:
        return self.hull[0][1]

    def frontier(self, r1) -> np.ndarray:
        """Largest R2 in the region at the given R1; ``-inf`` beyond the region."""
        r1 = np.asarray(r1, dtype=float)
        xs = np.array([p[0] for p in self.hull])
        ys = np.array([p[1] for p in self.hull])
        # a vertical last edge makes xs non-strictly increasing; keep its top
        keep = np.r_[xs[1:] > xs[:-1], True]
        if xs.size > 1 and xs[-1] == xs[-2]:
            keep[-1] = False
            keep[-2] = True
        out = np.interp(r1, xs[keep], ys[keep])
        tol = 1e-12 * max(1.0, self.max_r1)
        return np.where((r1 < -tol) | (r1 > self.max_r1 + tol), -np.inf, out)

    def on_hull(self, tol: float = 1e-9) -> list[bool]:
        scale = max(1.0, self.max_r1, self.max_r2)
        f = self.frontier([p[0] for p in self.points])
        return [bool(abs(fv - p[1]) <= tol * scale) for fv, p in zip(f, self.points)]

    def contains(self, r1: float, r2: float, tol: float = 1e-9) -> bool:
        if r1 < 0 or r2 < 0:
            return False
        return bool(r2 <= self.frontier(r1) + tol * max(1.0, self.max_r2))

    def dominance_margin(self, other: "RateRegion", slack: float = 0.0, ngrid: int = 201) -> float:
        """Smallest ``frontier((1 - slack) r) - (1 - slack) other.frontier(r)`` over ``other``'s R1 range.

        Nonnegative exactly when ``(1 - slack) * other`` lies inside this
        region on the grid.
        """
        r = np.linspace(0.0, other.max_r1, ngrid)
        return float(np.min(self.frontier((1.0 - slack) * r) - (1.0 - slack) * other.frontier(r)))

    def dominates(self, other: "RateRegion", slack: float = 0.0, ngrid: int = 201) -> bool:
        return self.dominance_margin(other, slack, ngrid) >= -1e-9 * max(1.0, other.max_r2)

    def rows(self):
        """``(scheme, R1, R2, on_hull)`` per raw point."""
        return [(self.scheme, a, b, h) for (a, b), h in zip(self.points, self.on_hull())]


def epa_region(config: SystemConfig, npoints: int = 41, model: RateModel | None = None) -> RateRegion:
    """UA-SD with equal power per symbol at full budget, sweeping the shared-stream split."""
    if npoints < 2:
        raise ValueError("npoints must be at least 2")
    model = model or RateModel(config, "adaptive")
    P = epa_power_for_budget(config)
    pts = [model.epa(P, t * P, P - t * P) for t in np.linspace(0.0, 1.0, npoints)]
    return RateRegion("uasd-epa", pts)


def upa_region(config: SystemConfig, eta_grid=None, model: RateModel | None = None,
               epsilon: float = 1e-5) -> RateRegion:
    """UA-SD with the CCP allocation, one point per weight ``eta``.

    An allocation that hits the iteration limit contributes its best iterate.
    """
    eta_grid = np.linspace(0.0, 1.0, 21) if eta_grid is None else np.asarray(eta_grid, float)
    model = model or RateModel(config, "fixed")
    pts = []
    for eta in eta_grid:
        prob = AllocationProblem(config, float(eta), model)
        try:
            alloc, _ = ccp_allocate(config, float(eta), epsilon=epsilon, problem=prob)
        except MaxIterations as exc:
            alloc = exc.best
        pts.append(prob.rates(prob.from_allocation(alloc)))
    return RateRegion("uasd-upa", pts)


def oma_tdma_region(config: SystemConfig, trials: int = 10_000, seed: int = 0,
                    policy: str = "waterfilling", npoints: int = 11) -> RateRegion:
    """Time sharing between the two single-user MIMO links at full budget."""
    c1, c2 = mc_su_rates(config, trials, seed, policy)
    ts = np.linspace(0.0, 1.0, npoints)
    return RateRegion("oma-tdma", [(t * c1.mean, (1.0 - t) * c2.mean) for t in ts])


def gsvd_rate_sweep(config: SystemConfig, fractions, trials: int, seed: int):
    """Monte-Carlo GSVD-NOMA ergodic rates for user-1 shares ``fractions`` of ``P``."""
    d = config.dims
    P = gsvd_power_for_budget(config)
    s2 = config.sigma2
    c, s = mc_gsvd_gains(config, trials, seed)
    g1 = c**2 / config.Pi1
    g2 = s**2 / config.Pi2
    strong2 = g2 >= g1
    priv = d.Mbar1 * math.log1p(P / (config.Pi1 * s2)) * LOG2E, d.Mbar2 * math.log1p(P / (config.Pi2 * s2)) * LOG2E
    out = []
    for t in fractions:
        P1, P2 = t * P, (1.0 - t) * P
        r1 = np.where(strong2, np.log1p(P1 * g1 / (s2 + P2 * g1)), np.log1p(P1 * g1 / s2))
        r2 = np.where(strong2, np.log1p(P2 * g2 / s2), np.log1p(P2 * g2 / (s2 + P1 * g2)))
        out.append((priv[0] + LOG2E * float(np.mean(r1.sum(axis=1))),
                    priv[1] + LOG2E * float(np.mean(r2.sum(axis=1)))))
    return out


def gsvd_region(config: SystemConfig, npoints: int = 41, trials: int = 10_000, seed: int = 0) -> RateRegion:
    """GSVD-NOMA at full budget; the origin alone when ``M1 + M2 == N``."""
    if config.M1 + config.M2 == config.N:
        return RateRegion("gsvd", [(0.0, 0.0)])
    return RateRegion("gsvd", gsvd_rate_sweep(config, np.linspace(0.0, 1.0, npoints), trials, seed))


def hybrid_region(uasd: RateRegion, oma: RateRegion) -> RateRegion:
    """Time sharing between UA-SD and single-user transmission."""
    return RateRegion("hybrid", list(uasd.points) + list(oma.points))


def union_region(scheme: str, *regions: RateRegion) -> RateRegion:
    return RateRegion(scheme, [p for r in regions for p in r.points])
