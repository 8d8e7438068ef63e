"""Long-term power allocation by the convex-concave procedure.

The user-1 shared-stream rate is a difference of two concave functions of
the powers, ``T(p1l + p2l) - T(p2l)``. Replacing ``T(p2l)`` by its tangent at
``p2l = q_l`` yields a concave lower bound that is tight at ``q``; maximizing
it and moving ``q`` to the new ``p2l`` never decreases the true objective.

Variables are scaled by ``Pmax`` internally and ordered as
``[p1l (M), p2l (M), p1, p2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, MaxIterations, SolverFailure
from .rates import LOG2E, RateModel
from .system import PowerAllocation, SystemConfig, budget_weights


def project_budget(y: np.ndarray, a: np.ndarray, budget: float = 1.0, active=None) -> np.ndarray:
    """Euclidean projection onto ``{y >= 0, a @ y <= budget}``.

    Entries outside ``active`` are set to zero. The multiplier of the budget
    constraint is found by bisection.
    """
    x = np.maximum(y, 0.0)
    if active is not None:
        x = np.where(active, x, 0.0)
    if a @ x <= budget:
        return x
    lo, hi = 0.0, float(np.max(np.where(a > 0, y / np.where(a > 0, a, 1.0), 0.0)))
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        z = np.maximum(y - tau * a, 0.0)
        if active is not None:
            z = np.where(active, z, 0.0)
        if a @ z > budget:
            lo = tau
        else:
            hi = tau
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    z = np.maximum(y - hi * a, 0.0)
    return np.where(active, z, 0.0) if active is not None else z


def _spg(fun, x0, project, tol=1e-7, max_iter=5000):
    """Monotone spectral projected gradient ascent for a smooth concave ``fun``.

    ``fun(x)`` returns ``(value, gradient)``. Stops when the projected
    gradient step ``||P(x + g) - x||_inf`` is below ``tol``.
    """
    x = project(x0)
    f, g = fun(x)
    step = 1.0
    for it in range(max_iter):
        residual = float(np.max(np.abs(project(x + g) - x))) if x.size else 0.0
        if residual <= tol:
            return x, f, residual, it
        d = project(x + step * g) - x
        slope = float(g @ d)
        # near the optimum the increase drops below the rounding of f
        noise = 8.0 * np.finfo(float).eps * abs(f)
        t = 1.0
        while True:
            xn = x + t * d
            fn, gn = fun(xn)
            if fn >= f + 1e-4 * t * slope - noise or t < 1e-12:
                break
            t *= 0.5
        if fn < f - noise:
            raise SolverFailure("line search stalled", last=x)
        s, yv = xn - x, gn - g
        sy = float(s @ yv)
        step = float(s @ s) / -sy if sy < 0 else 1e3
        step = min(max(step, 1e-10), 1e10)
        x, f, g = xn, fn, gn
    raise SolverFailure(f"no convergence in {max_iter} iterations (residual {residual:.3g})", last=x)


class AllocationProblem:
    """Weighted ergodic sum rate ``eta R1 + (1 - eta) R2`` on cached quadrature nodes."""

    def __init__(self, config: SystemConfig, eta: float, model: RateModel | None = None):
        if not 0.0 <= eta <= 1.0:
            raise DomainError(f"eta must lie in [0, 1], got {eta}")
        self.config = config
        self.eta = float(eta)
        self.model = model if model is not None and model.method == "fixed" else RateModel(config, "fixed")
        d = config.dims
        self.M = d.M
        c, s2, scale = config, config.sigma2, config.Pmax
        self.a = budget_weights(config)
        self.active = np.concatenate([np.ones(2 * d.M, bool), [d.Mbar1 > 0, d.Mbar2 > 0]])
        m = self.model
        if d.M:
            ul, _ = m.rule_low
            uh, _ = m.rule_high
            uf, _ = m.rule_full
            self.w_low = np.array([m.weights(p, m.rule_low)[1] for p in m.ordered])
            self.w_high = np.array([m.weights(p, m.rule_high)[1] for p in m.ordered])
            self.w_full = np.array([m.weights(p, m.rule_full)[1] for p in m.ordered])
            # SNR per unit of scaled power
            self.k_low = scale * ul / (c.Pi2 * s2)
            self.k_high = scale * (1.0 - uh) / (c.Pi1 * s2)
            self.k_full = scale * uf / (c.Pi2 * s2)
        self.priv = []
        for k, (dens, Pi, count) in enumerate(((m.wishart1, c.Pi1, d.Mbar1), (m.wishart2, c.Pi2, d.Mbar2))):
            if count == 0:
                self.priv.append(None)
            elif dens is None:
                self.priv.append(("det", count, scale / (Pi * s2)))
            else:
                u, w = m.weights(dens, m.rule_full)
                with np.errstate(divide="ignore", invalid="ignore"):
                    gain = np.where(u < 1.0, scale * u / ((1.0 - u) * Pi * s2), 0.0)
                self.priv.append(("wishart", count, (w, gain)))

    # -- scalar building blocks, each returning value and derivative in x
    @staticmethod
    def _logsum(x, w, k):
        """``sum_i w_i log2(1 + x_l k_i)`` per row ``l`` and its derivative."""
        z = 1.0 + x[:, None] * k[None, :]
        val = np.sum(w * np.log(z), axis=1) * LOG2E
        der = np.sum(w * k[None, :] / z, axis=1) * LOG2E
        return val, der

    def shared_t(self, x):
        """``T_l(x_l)``: user-1 shared rate of total power ``x_l`` without interference."""
        v1, d1 = self._logsum(x, self.w_low, self.k_low)
        v2, d2 = self._logsum(x, self.w_high, self.k_high)
        return v1 + v2, d1 + d2

    def _private(self, which, p):
        spec = self.priv[which]
        if spec is None:
            return 0.0, 0.0
        kind, count, data = spec
        if kind == "det":
            return count * math.log1p(p * data) * LOG2E, count * data / (1.0 + p * data) * LOG2E
        w, gain = data
        z = 1.0 + p * gain
        return count * float(w @ np.log(z)) * LOG2E, count * float(w @ (gain / z)) * LOG2E

    def split(self, y):
        M = self.M
        return y[:M], y[M:2 * M], y[2 * M], y[2 * M + 1]

    def rates(self, y):
        """True ergodic ``(R1, R2)`` at scaled powers ``y``."""
        p1l, p2l, p1, p2 = self.split(y)
        r1 = self._private(0, p1)[0]
        r2 = self._private(1, p2)[0]
        if self.M:
            r1 += float(np.sum(self.shared_t(p1l + p2l)[0] - self.shared_t(p2l)[0]))
            r2 += float(np.sum(self._logsum(p2l, self.w_full, self.k_full)[0]))
        return r1, r2

    def objective(self, y) -> float:
        r1, r2 = self.rates(y)
        return self.eta * r1 + (1.0 - self.eta) * r2

    def surrogate(self, q):
        """Concave lower bound of the objective, tight at ``p2l = q``; returns ``fun(y) -> (value, grad)``."""
        M, eta = self.M, self.eta
        if M:
            tq, dq = self.shared_t(q)

        def fun(y):
            p1l, p2l, p1, p2 = self.split(y)
            grad = np.zeros_like(y)
            v1, g1 = self._private(0, p1)
            v2, g2 = self._private(1, p2)
            value = eta * v1 + (1.0 - eta) * v2
            grad[2 * M], grad[2 * M + 1] = eta * g1, (1.0 - eta) * g2
            if M:
                ts, dts = self.shared_t(p1l + p2l)
                lin = tq + dq * (p2l - q)
                u, du = self._logsum(p2l, self.w_full, self.k_full)
                value += eta * float(np.sum(ts - lin)) + (1.0 - eta) * float(np.sum(u))
                grad[:M] = eta * dts
                grad[M:2 * M] = eta * (dts - dq) + (1.0 - eta) * du
            return value, grad
        return fun

    def true_fun(self):
        """Objective with gradient; concave when there are no shared streams."""
        M, eta = self.M, self.eta

        def fun(y):
            p1l, p2l, p1, p2 = self.split(y)
            grad = np.zeros_like(y)
            v1, g1 = self._private(0, p1)
            v2, g2 = self._private(1, p2)
            value = eta * v1 + (1.0 - eta) * v2
            grad[2 * M], grad[2 * M + 1] = eta * g1, (1.0 - eta) * g2
            if M:
                ts, dts = self.shared_t(p1l + p2l)
                t2, dt2 = self.shared_t(p2l)
                u, du = self._logsum(p2l, self.w_full, self.k_full)
                value += eta * float(np.sum(ts - t2)) + (1.0 - eta) * float(np.sum(u))
                grad[:M] = eta * dts
                grad[M:2 * M] = eta * (dts - dt2) + (1.0 - eta) * du
            return value, grad
        return fun

    def project(self, y):
        return project_budget(y, self.a, 1.0, self.active)

    def to_allocation(self, y) -> PowerAllocation:
        s = self.config.Pmax
        p1l, p2l, p1, p2 = self.split(y)
        return PowerAllocation.upa(p1 * s, p2 * s, p1l * s, p2l * s)

    def from_allocation(self, alloc: PowerAllocation) -> np.ndarray:
        u = alloc.as_upa(self.config.dims)
        s = self.config.Pmax
        return np.concatenate([u.p1l, u.p2l, [u.p1, u.p2]]) / s

    def start_point(self):
        """Feasible interior start: every variable at the same value, budget half used."""
        y = self.active.astype(float)
        total = float(self.a @ y)
        return 0.5 * y / total if total > 0 else y


def solve_p2(config: SystemConfig, eta: float, q, start: PowerAllocation | None = None,
             tol: float = 1e-7, problem: AllocationProblem | None = None) -> PowerAllocation:
    """Maximize the concave surrogate of ``eta R1 + (1 - eta) R2`` for fixed ``q``.

    ``q`` holds the linearization points of the user-2 shared powers in watts.

    Raises
    ------
    SolverFailure
        If the line search stalls; ``last`` holds the last iterate.
    """
    if not config.overloaded:
        raise DomainError("the surrogate problem is only needed when M1 + M2 > N")
    prob = problem or AllocationProblem(config, eta)
    q = np.asarray(q, dtype=float)
    if q.shape != (prob.M,) or np.any(q < 0):
        raise DomainError(f"q must be a nonnegative vector of length {prob.M}")
    if config.Pmax == 0:
        return PowerAllocation.upa(0, 0, [0.0] * prob.M, [0.0] * prob.M)
    y0 = prob.from_allocation(start) if start is not None else prob.start_point()
    y, *_ = _spg(prob.surrogate(q / config.Pmax), y0, prob.project, tol=tol)
    return prob.to_allocation(y)


@dataclass
class CcpState:
    """Trace of the convex-concave procedure."""

    q: np.ndarray
    iterate: PowerAllocation
    objective: float
    iteration: int
    epsilon: float
    converged: bool = False
    history: list = field(default_factory=list)

    def rows(self):
        """``(iteration, objective, max_delta)`` per iteration."""
        return list(self.history)


def ccp_allocate(config: SystemConfig, eta: float, epsilon: float = 1e-5, max_iter: int = 100,
                 tol: float = 1e-7, problem: AllocationProblem | None = None):
    """Weighted-sum-rate power allocation.

    Runs the convex-concave procedure from ``q = 0`` until no scaled power
    (in units of ``Pmax``) changes by more than ``epsilon``. Without shared
    streams the problem is concave and is solved in one pass.

    Returns
    -------
    (PowerAllocation, CcpState)

    Raises
    ------
    MaxIterations
        After ``max_iter`` outer iterations; ``best`` holds the best
        allocation and ``trace`` the state.
    """
    prob = problem or AllocationProblem(config, eta)
    M = prob.M
    if config.Pmax == 0:
        alloc = PowerAllocation.upa(0, 0, [0.0] * M, [0.0] * M)
        state = CcpState(np.zeros(M), alloc, 0.0, 1, epsilon, True, [(1, 0.0, 0.0)])
        return alloc, state
    if not config.overloaded:
        y, f, *_ = _spg(prob.true_fun(), prob.start_point(), prob.project, tol=tol)
        alloc = prob.to_allocation(y)
        return alloc, CcpState(np.zeros(0), alloc, f, 1, epsilon, True, [(1, f, 0.0)])

    q = np.zeros(M)
    y_prev = None
    y = prob.start_point()
    history = []
    best = None
    for n in range(1, max_iter + 1):
        y, *_ = _spg(prob.surrogate(q), y, prob.project, tol=tol)
        obj = prob.objective(y)
        delta = math.inf if y_prev is None else float(np.max(np.abs(y - y_prev)))
        history.append((n, obj, delta))
        if best is None or obj >= best[0]:
            best = (obj, y.copy())
        q = y[M:2 * M].copy()
        if delta < epsilon:
            alloc = prob.to_allocation(y)
            return alloc, CcpState(q * config.Pmax, alloc, obj, n, epsilon, True, history)
        y_prev = y.copy()
    alloc = prob.to_allocation(best[1])
    state = CcpState(q * config.Pmax, alloc, best[0], max_iter, epsilon, False, history)
    raise MaxIterations(f"no convergence within {max_iter} iterations", best=alloc, trace=state)


def best_epa_weighted(config: SystemConfig, eta: float, npoints: int = 201, model: RateModel | None = None):
    """Best ``eta R1 + (1 - eta) R2`` over EPA splits at full budget, with its split."""
    from .system import epa_power_for_budget
    model = model or RateModel(config, "fixed")
    P = epa_power_for_budget(config)
    best = (-math.inf, None)
    for t in np.linspace(0.0, 1.0, npoints):
        r1, r2 = model.epa(P, t * P, (1.0 - t) * P)
        best = max(best, (eta * r1 + (1.0 - eta) * r2, float(t)))
    return best
