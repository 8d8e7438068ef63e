"""Self-checks of every module on one configuration.

Failures are reported as data; nothing here raises on a failed check.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .allocation import ccp_allocate
from .decompositions import gsvd_decompose, generalized_eigen_gsv, uasd_decompose
from .densities import f_marginal_pdf, f_ordered_pdf, map_wishart_params
from .errors import InfinitePower, MaxIterations, NomaError
from .montecarlo import mc_transmit_power
from .rates import RateModel
from .system import (PowerAllocation, SystemConfig, derive_dims, sample_channel,
                     transmit_power_epa, transmit_power_gsvd, transmit_power_upa)

STRUCTURE_TOL = 1e-10
GSV_TOL = 1e-8


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _unitarity(Q) -> float:
    return float(np.max(np.abs(Q.conj().T @ Q - np.eye(Q.shape[1])), initial=0.0))


def uasd_residuals(H1, H2, dec) -> dict:
    """Largest deviations from the UA-SD invariants for one draw."""
    d = dec.dims
    res = {
        "structure": max(float(np.max(np.abs(dec.Q1 @ H1 @ dec.Z - dec.pattern1()), initial=0.0)),
                         float(np.max(np.abs(dec.Q2 @ H2 @ dec.Z - dec.pattern2()), initial=0.0))),
        "unitarity": max(_unitarity(dec.Q1), _unitarity(dec.Q2)),
        "cs_identity": float(np.max(np.abs(dec.Sigma1**2 + dec.Sigma2**2 - 1.0), initial=0.0)),
        "gsv": 0.0,
        "d1_identity": 0.0,
    }
    if d.M:
        ref = generalized_eigen_gsv(H2, H1, d.M, d.Mbar1)
        res["gsv"] = float(np.max(np.abs(np.sort(dec.lam) - np.sort(ref)) / np.maximum(1.0, np.sort(ref))))
    if H1.shape[0] + H2.shape[0] > H1.shape[1]:
        res["d1_identity"] = float(np.max(np.abs(dec.D1 - 1.0), initial=0.0))
    return res


def gsvd_residuals(H1, H2, dec) -> dict:
    L = dec.dims.L
    CS = dec.C.T @ dec.C + dec.S.T @ dec.S
    return {
        "structure": max(float(np.max(np.abs(dec.Q1 @ H1 @ dec.Z - dec.C))),
                         float(np.max(np.abs(dec.Q2 @ H2 @ dec.Z - dec.S)))),
        "unitarity": max(_unitarity(dec.Q1), _unitarity(dec.Q2)),
        "cs_identity": float(np.max(np.abs(CS - np.eye(L)))),
    }


def _worst(rows: list[dict]) -> dict:
    return {k: max(r[k] for r in rows) for k in rows[0]}


def _fmt(d: dict) -> str:
    return ", ".join(f"{k}={v:.3g}" for k, v in d.items())


def check_dims(config: SystemConfig) -> CheckResult:
    d = derive_dims(config.N, config.M1, config.M2)
    ok = d.Mbar1 + d.Mbar2 + d.M == d.L == min(config.M1 + config.M2, config.N)
    return CheckResult("dims", ok, f"L={d.L} Mbar1={d.Mbar1} Mbar2={d.Mbar2} M={d.M}")


def check_uasd(config, draws, seed, decompose: Callable = uasd_decompose) -> CheckResult:
    rows = []
    for i in range(draws):
        ch = sample_channel(config, seed, i)
        try:
            rows.append(uasd_residuals(ch.H1, ch.H2, decompose(ch.H1, ch.H2)))
        except NomaError as exc:
            return CheckResult("uasd-decomposition", False, f"trial {i}: {type(exc).__name__}: {exc}")
    w = _worst(rows)
    ok = all(v < STRUCTURE_TOL for k, v in w.items() if k != "gsv") and w["gsv"] < GSV_TOL
    return CheckResult("uasd-decomposition", ok, f"{draws} draws, " + _fmt(w))


def check_gsvd(config, draws, seed, decompose: Callable = gsvd_decompose) -> CheckResult:
    rows = []
    for i in range(draws):
        ch = sample_channel(config, seed, i)
        try:
            rows.append(gsvd_residuals(ch.H1, ch.H2, decompose(ch.H1, ch.H2)))
        except NomaError as exc:
            return CheckResult("gsvd-decomposition", False, f"trial {i}: {type(exc).__name__}: {exc}")
    w = _worst(rows)
    return CheckResult("gsvd-decomposition", all(v < STRUCTURE_TOL for v in w.values()), f"{draws} draws, " + _fmt(w))


def check_power(config, scheme, trials, seed) -> CheckResult:
    """Average transmit power formula against a Monte-Carlo estimate (3 standard errors)."""
    name = f"transmit-power-{scheme}"
    if scheme == "gsvd":
        try:
            expected = transmit_power_gsvd(1.0, config)
        except InfinitePower as exc:
            return CheckResult(name, True, f"expected InfinitePower: {exc}")
        est = mc_transmit_power(config, "gsvd", None, trials, seed)
    else:
        alloc = PowerAllocation.upa(1.0, 1.0, [0.3] * config.dims.M, [0.7] * config.dims.M)
        expected = transmit_power_upa(alloc, config)
        est = mc_transmit_power(config, "uasd", alloc, trials, seed)
    ok = est.within(expected, 3.0)
    return CheckResult(name, ok, f"formula {expected:.6g}, estimate {est.mean:.6g} +- {est.stderr:.2g}")


def check_densities(config) -> CheckResult:
    parts, ok = [], True
    if config.overloaded:
        f = map_wishart_params(config.M1, config.M2, config.N)
        marg = f_marginal_pdf(f.mu1, f.mu2, f.nu)
        ordered = [f_ordered_pdf(l, f.mu1, f.mu2, f.nu) for l in range(1, f.nu + 1)]
        norm = max(abs(p.integral() - 1.0) for p in [marg, *ordered])
        x = np.geomspace(1e-3, 1e3, 200)
        mix = sum(p.pdf(x) for p in ordered) / f.nu
        corr = float(np.max(np.abs(mix - marg.pdf(x))))
        ok &= norm < 1e-6 and corr < 1e-8
        parts += [f"F{(f.mu1, f.mu2, f.nu)} normalization={norm:.2g}", f"mixture identity={corr:.2g}"]
    model = RateModel(config)
    for w in (model.wishart1, model.wishart2):
        if w is not None:
            dev = abs(w.integral() - 1.0)
            ok &= dev < 1e-6
            parts.append(f"{w.label} normalization={dev:.2g}")
    return CheckResult("densities", bool(ok), ", ".join(parts) or "no densities for this shape")


def check_rates(config) -> CheckResult:
    fixed, adaptive = RateModel(config, "fixed"), RateModel(config, "adaptive")
    P = config.Pmax / transmit_power_epa(1.0, config)
    a = fixed.epa(P, 0.4 * P, 0.6 * P)
    b = adaptive.epa(P, 0.4 * P, 0.6 * P)
    c = fixed.upa(PowerAllocation.epa(P, 0.4).as_upa(config.dims))
    rel = max(abs(x - y) / max(1.0, abs(y)) for x, y in zip(a, b))
    collapse = max(abs(x - y) for x, y in zip(a, c))
    ok = rel < 1e-8 and collapse < 1e-10
    return CheckResult("rates", ok, f"fixed vs adaptive={rel:.2g}, UPA collapse={collapse:.2g}")


def check_allocation(config, eta: float = 0.5) -> CheckResult:
    try:
        alloc, state = ccp_allocate(config, eta)
        flag = ""
    except MaxIterations as exc:
        alloc, state, flag = exc.best, exc.trace, " (iteration limit)"
    objs = [h[1] for h in state.history]
    drop = min((b - a for a, b in zip(objs, objs[1:])), default=0.0)
    u = alloc.as_upa(config.dims)
    used = transmit_power_upa(alloc, config)
    feasible = used <= config.Pmax * (1 + 1e-9) + 1e-15 and min([u.p1, u.p2, *u.p1l, *u.p2l]) >= 0
    ok = drop >= -1e-9 and feasible and not flag
    return CheckResult("allocation", ok, f"eta={eta}, {state.iteration} iterations{flag}, "
                                         f"min step {drop:.2g}, budget use {used / max(config.Pmax, 1e-300):.6f}")


def run_checks(config: SystemConfig, scheme: str = "uasd", draws: int = 50, trials: int = 2000, seed: int = 2024,
               decompose: Callable | None = None) -> list[CheckResult]:
    """All checks for ``config``.

    ``decompose`` replaces the UA-SD decomposition under test, which lets a
    deliberately corrupted factorization be fed through the suite.
    """
    results = [check_dims(config)]
    if scheme in ("uasd", "bd", "jzf", "oma"):
        results.append(check_uasd(config, draws, seed, decompose or uasd_decompose))
    results.append(check_gsvd(config, draws, seed))
    results.append(check_power(config, "gsvd" if scheme == "gsvd" else "uasd", trials, seed))
    results.append(check_densities(config))
    if config.Pmax > 0:
        results.append(check_rates(config))
    results.append(check_allocation(config))
    return results


DEFAULT_SHAPES = ((5, 3, 3), (4, 2, 2), (3, 3, 3), (4, 1, 4), (3, 4, 2))


def default_configs() -> list[SystemConfig]:
    """Configurations checked when none is given, as ``(N, M1, M2)``."""
    return [SystemConfig.from_distances(N, M1, M2) for N, M1, M2 in DEFAULT_SHAPES]


def report(results: list[CheckResult]) -> dict:
    return {"passed": all(r.passed for r in results), "checks": [asdict(r) for r in results]}

