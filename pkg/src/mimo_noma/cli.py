"""Command-line front end.

Exit status is 0 on success, 1 when a check fails and 2 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .allocation import ccp_allocate
from .decompositions import bd_decompose, format_matrix, gsvd_decompose, jzf_decompose, uasd_decompose
from .densities import f_marginal_pdf, f_ordered_pdf, map_wishart_params, sample_f_eigenvalues
from .errors import DimensionError, DomainError, InfinitePower, MaxIterations, NomaError
from .files import (Campaign, DEFAULT_SCENARIO, campaign_from_mapping, config_dict, config_hash, csv_text,
                    json_text, load_campaign, write_text)
from .montecarlo import Estimate, mc_gsvd_rates, mc_su_rates, mc_transmit_power, mc_uasd_rates
from .rates import RateModel
from .regions import epa_region, gsvd_region, hybrid_region, oma_tdma_region, union_region, upa_region
from .system import (PowerAllocation, epa_power_for_budget, gsvd_power_for_budget, sample_channel,
                     transmit_power_epa, transmit_power_gsvd, transmit_power_upa)
from .verify import default_configs, report, run_checks

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2
SCHEMES = ("uasd", "gsvd", "bd", "jzf", "oma")


class UsageError(Exception):
    pass


class Output:
    """Writes named artifacts to ``--out`` or, without it, to stdout in order."""

    def __init__(self, out: str | None, stream=None):
        self.out = Path(out) if out else None
        self.stream = stream or sys.stdout
        self.written: list[str] = []

    def emit(self, name: str, text: str):
        if self.out is None:
            self.stream.write(text)
        else:
            self.written.append(str(write_text(self.out / name, text)))


def _campaign(args) -> Campaign:
    if args.config:
        camp = load_campaign(args.config)
        scenario = dict(camp.scenario)
    else:
        scenario = dict(DEFAULT_SCENARIO)
    if args.seed is not None:
        scenario["seed"] = args.seed
    if args.trials is not None:
        scenario["trials"] = args.trials
    return campaign_from_mapping(scenario)


def _estimate(e: Estimate) -> dict:
    return {"mean": e.mean, "stderr": e.stderr, "count": e.count}


def _epa_alloc(config, split):
    return PowerAllocation.epa(epa_power_for_budget(config), split)


# ---------------------------------------------------------------- subcommands

def cmd_dims(args, camp, out):
    c = camp.config
    d = c.dims
    body = {"config": config_dict(c), "L": d.L, "Mbar1": d.Mbar1, "Mbar2": d.Mbar2, "M": d.M,
            "overloaded": c.overloaded, "epa_power_factor": transmit_power_epa(1.0, c)}
    if c.overloaded:
        f = map_wishart_params(c.M1, c.M2, c.N)
        body["f_params"] = {"m1": f.mu1, "m2": f.mu2, "q": f.nu}
    try:
        body["gsvd_power_factor"] = transmit_power_gsvd(1.0, c)
    except InfinitePower:
        body["gsvd_power_factor"] = None
    out.emit("dims.json", json_text(body))
    return EXIT_OK


def cmd_decompose(args, camp, out):
    c = camp.config
    ch = sample_channel(c, camp.seed, args.index)
    mats = {"H1": ch.H1, "H2": ch.H2}
    if args.scheme == "uasd":
        dec = uasd_decompose(ch.H1, ch.H2)
        mats.update(Q1=dec.Q1, Q2=dec.Q2, Z=dec.Z, T=dec.T,
                    Sigma1=np.diag(dec.Sigma1), Sigma2=np.diag(dec.Sigma2), D1=np.diag(dec.D1), D2=np.diag(dec.D2))
    elif args.scheme == "gsvd":
        dec = gsvd_decompose(ch.H1, ch.H2)
        mats.update(Q1=dec.Q1, Q2=dec.Q2, Z=dec.Z, C=dec.C, S=dec.S)
    elif args.scheme == "bd":
        Q1, Q2, P, s1, s2 = bd_decompose(ch.H1, ch.H2)
        mats.update(Q1=Q1, Q2=Q2, P=P, Sigma1=np.diag(s1), Sigma2=np.diag(s2))
    elif args.scheme == "jzf":
        mats.update(P=jzf_decompose(ch.H1, ch.H2))
    else:
        raise UsageError("decompose supports the schemes uasd, gsvd, bd and jzf")
    for name, A in mats.items():
        out.emit(f"{name}.txt", f"# {name} {A.shape[0]}x{A.shape[1] if A.ndim > 1 else 1}\n" if out.out is None else "")
        out.emit(f"{name}.txt", format_matrix(A))
    return EXIT_OK


def cmd_pdf(args, camp, out):
    c = camp.config
    if not c.overloaded:
        raise UsageError("eigenvalue densities exist only when M1 + M2 > N")
    f = map_wishart_params(c.M1, c.M2, c.N)
    if args.order:
        if not 1 <= args.order <= f.nu:
            raise UsageError(f"--order must lie in 1..{f.nu}")
        dens = f_ordered_pdf(args.order, f.mu1, f.mu2, f.nu)
    else:
        dens = f_marginal_pdf(f.mu1, f.mu2, f.nu)
    lam = sample_f_eigenvalues(f.mu1, f.mu2, f.nu, camp.trials, camp.seed)
    sample = lam[:, args.order - 1] if args.order else lam.ravel()
    hi = args.lam_max or float(np.quantile(sample, 0.99))
    edges = np.linspace(0.0, hi, args.bins + 1)
    counts, _ = np.histogram(sample, bins=edges)
    emp = counts / (sample.size * np.diff(edges))
    mid = 0.5 * (edges[1:] + edges[:-1])
    rows = zip(mid.tolist(), dens.pdf(mid).tolist(), emp.tolist())
    out.emit("pdf.csv", csv_text(["lambda", "pdf_analytic", "pdf_empirical"], rows))
    return EXIT_OK


def _allocate(config, eta):
    try:
        return ccp_allocate(config, eta)
    except MaxIterations as exc:
        print(f"warning: {exc}; using the best iterate", file=sys.stderr)
        return exc.best, exc.trace


def cmd_rates(args, camp, out):
    c = camp.config
    body = {"config": config_dict(c), "scheme": args.scheme, "power": args.power}
    if args.scheme == "uasd":
        model = RateModel(c, "adaptive")
        if args.power == "epa":
            alloc = _epa_alloc(c, args.split)
            r = model.epa(alloc.P, alloc.P1, alloc.P2)
            body["P"] = alloc.P
            body["split"] = args.split
        else:
            alloc, state = _allocate(c, args.eta)
            r = model.upa(alloc)
            body["eta"] = args.eta
            body["allocation"] = _alloc_dict(alloc)
        body["transmit_power"] = transmit_power_upa(alloc, c)
        body["R1"], body["R2"] = r
    elif args.scheme == "gsvd":
        P = gsvd_power_for_budget(c)
        e1, e2 = mc_gsvd_rates(c, P, args.split * P, camp.trials, camp.seed)
        body.update(P=P, split=args.split, R1=_estimate(e1), R2=_estimate(e2))
    elif args.scheme == "oma":
        e1, e2 = mc_su_rates(c, camp.trials, camp.seed)
        body.update(C1=_estimate(e1), C2=_estimate(e2))
    else:
        if c.overloaded:
            raise DimensionError(f"{args.scheme} needs M1 + M2 <= N")
        r = RateModel(c, "adaptive").epa(epa_power_for_budget(c), 0.0, epa_power_for_budget(c))
        body["R1"], body["R2"] = r
    out.emit("rates.json", json_text(body))
    return EXIT_OK


def _alloc_dict(alloc):
    return {"p1": alloc.p1, "p2": alloc.p2, "p1l": list(alloc.p1l), "p2l": list(alloc.p2l)}


def cmd_allocate(args, camp, out):
    c = camp.config
    alloc, state = _allocate(c, args.eta)
    model = RateModel(c, "fixed")
    r1, r2 = model.upa(alloc)
    body = {"config": config_dict(c), "eta": args.eta, "allocation": _alloc_dict(alloc), "R1": r1, "R2": r2,
            "objective": state.objective, "iterations": state.iteration, "converged": state.converged,
            "transmit_power": transmit_power_upa(alloc, c)}
    out.emit("allocation.json", json_text(body))
    out.emit("ccp_trace.csv", csv_text(["iteration", "objective", "max_delta"], state.rows()))
    return EXIT_OK


def cmd_region(args, camp, out):
    c = camp.config
    schemes = [args.scheme] if args.scheme else ["uasd", "gsvd", "oma"]
    regions = {}
    for s in schemes:
        if s == "uasd":
            if args.power in (None, "epa"):
                regions["uasd-epa"] = epa_region(c, args.npoints)
            if args.power in (None, "upa"):
                eta = np.linspace(0.0, 1.0, args.eta_points)
                regions["uasd-upa"] = upa_region(c, eta)
        elif s == "gsvd":
            regions["gsvd"] = gsvd_region(c, args.npoints, camp.trials, camp.seed)
        elif s == "oma":
            regions["oma-tdma"] = oma_tdma_region(c, camp.trials, camp.seed, args.su_policy)
        else:
            raise UsageError(f"region supports uasd, gsvd and oma, not {s}")
    uasd = [r for k, r in regions.items() if k.startswith("uasd")]
    if uasd and "oma-tdma" in regions:
        regions["hybrid"] = hybrid_region(union_region("uasd", *uasd), regions["oma-tdma"])
    manifest = {"config": config_dict(c), "config_hash": config_hash(c), "seed": camp.seed, "trials": camp.trials,
                "regions": []}
    for name, reg in regions.items():
        fname = f"region_{name}.csv"
        out.emit(fname, csv_text(["scheme", "R1", "R2", "on_hull"], reg.rows()))
        manifest["regions"].append({"scheme": name, "file": fname, "hull": [list(p) for p in reg.hull]})
    out.emit("manifest.json", json_text(manifest))
    return EXIT_OK


def cmd_montecarlo(args, camp, out):
    c = camp.config
    body = {"config": config_dict(c), "seed": camp.seed, "trials": camp.trials, "scheme": args.scheme}
    if args.scheme == "gsvd":
        P = gsvd_power_for_budget(c)
        e1, e2 = mc_gsvd_rates(c, P, args.split * P, camp.trials, camp.seed)
        pt = mc_transmit_power(c, "gsvd", None, camp.trials, camp.seed, P)
        body.update(P=P, transmit_power_formula=transmit_power_gsvd(P, c))
    elif args.scheme == "uasd":
        if args.power == "upa":
            alloc, _ = _allocate(c, args.eta)
            analytic = RateModel(c, "adaptive").upa(alloc)
            formula = transmit_power_upa(alloc, c)
        else:
            alloc = _epa_alloc(c, args.split)
            analytic = RateModel(c, "adaptive").epa(alloc.P, alloc.P1, alloc.P2)
            formula = transmit_power_epa(alloc.P, c)
        e1, e2 = mc_uasd_rates(c, alloc, camp.trials, camp.seed)
        pt = mc_transmit_power(c, "uasd", alloc, camp.trials, camp.seed)
        body.update(power=args.power, analytic={"R1": analytic[0], "R2": analytic[1]}, transmit_power_formula=formula)
        if c.overloaded:
            f = map_wishart_params(c.M1, c.M2, c.N)
            lam = sample_f_eigenvalues(f.mu1, f.mu2, f.nu, camp.trials, camp.seed).ravel()
            counts, edges = np.histogram(lam, bins=args.bins, range=(0.0, float(np.quantile(lam, 0.99))))
            body["eigenvalue_histogram"] = {"edges": edges.tolist(), "counts": counts.tolist(), "total": lam.size}
    elif args.scheme == "oma":
        e1, e2 = mc_su_rates(c, camp.trials, camp.seed, args.su_policy)
        pt = None
    else:
        raise UsageError("montecarlo supports the schemes uasd, gsvd and oma")
    body["R1"], body["R2"] = _estimate(e1), _estimate(e2)
    if pt is not None:
        body["transmit_power"] = _estimate(pt)
    out.emit("montecarlo.json", json_text(body))
    return EXIT_OK


def cmd_verify(args, camp, out):
    configs = [camp.config] if args.config else default_configs()
    draws = min(camp.trials, args.draws)
    results, lines = [], []
    for c in configs:
        res = run_checks(c, scheme=args.scheme or "uasd", draws=draws, trials=min(camp.trials, 2000), seed=camp.seed)
        header = f"# N={c.N} M1={c.M1} M2={c.M2}"
        lines += [header] + [r.line() for r in res]
        results.append({"config": config_dict(c), **report(res)})
    passed = all(r["passed"] for r in results)
    lines.append("verify: " + ("all checks passed" if passed else "FAILED"))
    print("\n".join(lines), file=sys.stderr if out.out is None else sys.stdout)
    out.emit("verify.json", json_text({"passed": passed, "configs": results}))
    return EXIT_OK if passed else EXIT_CHECK


COMMANDS = {
    "dims": (cmd_dims, "derived stream partition and power factors"),
    "decompose": (cmd_decompose, "decompose one sampled channel and dump the factors"),
    "pdf": (cmd_pdf, "analytic against empirical eigenvalue density"),
    "rates": (cmd_rates, "ergodic rates of one scheme"),
    "region": (cmd_region, "rate regions with convex frontiers"),
    "allocate": (cmd_allocate, "weighted sum-rate power allocation"),
    "montecarlo": (cmd_montecarlo, "empirical rates, transmit power and eigenvalues"),
    "verify": (cmd_verify, "run the self-check suite"),
}


def _fraction(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not a 64-bit unsigned integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML scenario file")
    common.add_argument("--seed", type=_seed, help="Monte-Carlo seed (overrides the scenario)")
    common.add_argument("--trials", type=_positive, help="Monte-Carlo trials (overrides the scenario)")
    common.add_argument("--out", help="output directory; stdout when omitted")
    common.add_argument("--scheme", choices=SCHEMES)
    common.add_argument("--power", choices=("epa", "upa"))
    common.add_argument("--eta", type=_fraction, default=0.5, help="weight of user 1 in the sum rate")
    common.add_argument("--split", type=_fraction, default=0.5, help="EPA share of user 1 on shared streams")

    parser = argparse.ArgumentParser(prog="mimo-noma", description="UA-SD MIMO-NOMA analysis and simulation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {name: sub.add_parser(name, parents=[common], help=text) for name, (_, text) in COMMANDS.items()}
    subs["decompose"].add_argument("--index", type=int, default=0, help="trial index of the channel draw")
    subs["pdf"].add_argument("--order", type=int, default=0, help="eigenvalue rank l (0 for the marginal)")
    subs["pdf"].add_argument("--bins", type=_positive, default=60)
    subs["pdf"].add_argument("--lam-max", type=float, default=None, help="upper histogram edge")
    subs["region"].add_argument("--npoints", type=_positive, default=41, help="EPA and GSVD sweep points")
    subs["region"].add_argument("--eta-points", type=_positive, default=21)
    for name in ("region", "montecarlo"):
        subs[name].add_argument("--su-policy", choices=("waterfilling", "equal"), default="waterfilling")
    subs["montecarlo"].add_argument("--bins", type=_positive, default=40)
    subs["verify"].add_argument("--draws", type=_positive, default=50, help="channel draws per structure check")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.scheme is None and args.command in ("decompose", "rates", "montecarlo"):
        args.scheme = "uasd"
    if args.power is None and args.command in ("rates", "montecarlo"):
        args.power = "epa"
    out = Output(args.out)
    try:
        camp = _campaign(args)
        return COMMANDS[args.command][0](args, camp, out)
    except (UsageError, DomainError, DimensionError, OSError) as exc:
        print(f"mimo-noma {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NomaError as exc:
        print(f"mimo-noma {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
