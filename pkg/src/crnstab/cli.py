"""Command-line entry point.

Exit codes: 0 success / positive verdict, 2 usage or precondition error,
3 negative verdict, 4 numerical failure, 5 inconclusive.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io as crnio
from .complex_balance import (ConvergenceError, NotWeaklyReversible, check_complex_balance,
                              solve_cb_steady_state, toric_membership)
from .dynamics import IntegrationError, IntegratorConfig, integrate
from .equivalence import SpeciesMismatch, cb_region_probe_ex45, dynamically_equivalent, region_sweep
from .kinetics import RateAssignment, RateError, load_rates
from .network import NetworkError, ReactionNetwork, parse_network_with_rates
from .robustness import (PROBE_CONFIG, PlanError, PerturbationPlan, ShapeError, bifurcation_scan_1d,
                         default_eps, default_initial_conditions, global_stability_probe,
                         permanence_probe, run_trials)

log = logging.getLogger("crnstab")

EXIT_OK, EXIT_USAGE, EXIT_NEGATIVE, EXIT_NUMERICAL, EXIT_INCONCLUSIVE = 0, 2, 3, 4, 5

CUBIC_DSL = "0 <-> X\n2X <-> 3X\n"


class UsageError(Exception):
    pass


def _read_network(path: str, mode: str):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"network file not found: {path}")
    return parse_network_with_rates(p.read_text(encoding="utf-8"), mode, source=str(p))


def _load_system(args) -> tuple[ReactionNetwork, RateAssignment]:
    net, inline = _read_network(args.net, args.mode)
    if args.rates:
        if not Path(args.rates).exists():
            raise UsageError(f"rates file not found: {args.rates}")
        return net, load_rates(net, args.rates)
    if inline is None:
        raise UsageError("no --rates given and the network file has no inline ': k' rate annotations")
    return net, RateAssignment.of(net, inline)


def _parse_vector(text: str, what: str) -> np.ndarray:
    try:
        x = np.array([float(v) for v in text.replace(",", " ").split()], dtype=float)
    except ValueError:
        raise UsageError(f"cannot parse {what} {text!r}") from None
    return x


def _parse_state(text: str, net: ReactionNetwork) -> np.ndarray:
    x = _parse_vector(text, "state")
    if x.shape != (net.n,):
        raise UsageError(f"state has {x.size} entries, network has {net.n} species")
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise UsageError("state must be strictly positive")
    return x


def _parse_grid(text: str) -> list[float]:
    """'a,b,c' or 'start:stop:num' (inclusive linspace)."""
    if ":" in text:
        a, b, n = text.split(":")
        return [float(v) for v in np.linspace(float(a), float(b), int(n))]
    return [float(v) for v in _parse_vector(text, "grid")]


def _cfg(args, **overrides) -> IntegratorConfig:
    base = dict(t_end=args.t_end, rel_tol=args.rel_tol, abs_tol=args.abs_tol)
    base.update(overrides)
    return IntegratorConfig(**base)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    net, _ = _read_network(args.net, args.mode)
    _emit(crnio.dumps(crnio.structural_report(net)), args.out)
    return EXIT_OK


def cmd_check_cb(args) -> int:
    net, _ = _read_network(args.net, args.mode)
    if not net.analysis.weakly_reversible:
        raise UsageError("check-cb requires a weakly reversible network (every linkage class strongly connected)")
    net, kappa = _load_system(args)
    x0 = _parse_state(args.x0, net) if args.x0 else None
    report = check_complex_balance(net, kappa, x0)
    d = report.to_dict(net)
    d["tolerances"] = {"toric_residual": 1e-8, "vertex_residual": 1e-10, "centre": 1e-8}
    _emit(crnio.dumps(d), args.out)
    return EXIT_OK if report.is_complex_balanced else EXIT_NEGATIVE


def cmd_simulate(args) -> int:
    net, kappa = _load_system(args)
    if not args.x0:
        raise UsageError("simulate needs --x0")
    x0 = _parse_state(args.x0, net)
    cfg = _cfg(args)
    code, err = EXIT_OK, None
    try:
        traj = integrate(net, kappa, x0, cfg)
    except IntegrationError as e:
        traj, code, err = e.trajectory, EXIT_NUMERICAL, str(e)
        log.error("%s", e)
    meta = traj.metadata()
    meta["error"] = err
    if args.out:
        prefix = Path(args.out)
        if args.format == "csv":
            prefix.with_suffix(".csv").write_text(traj.to_csv(), encoding="utf-8")
            prefix.with_suffix(".json").write_text(crnio.dumps(meta), encoding="utf-8")
        else:
            full = json.loads(traj.to_json())
            full["error"] = err
            prefix.with_suffix(".json").write_text(crnio.dumps(full), encoding="utf-8")
    else:
        sys.stdout.write(traj.to_csv() if args.format == "csv" else crnio.dumps(meta))
    return code


def cmd_perturb(args) -> int:
    net, kappa = _load_system(args)
    if not args.x0:
        raise UsageError("perturb needs --x0 (a point of the compatibility class)")
    x0 = _parse_state(args.x0, net)
    eps = args.eps if args.eps is not None else default_eps(kappa)
    cfg = _cfg(args)
    ics = default_initial_conditions(net, x0)
    plan = PerturbationPlan(kappa, eps, args.trials, args.seed, ics, cfg)
    plan.validate(net)
    x_star = solve_cb_steady_state(net, kappa, x0) if _toric_ok(net, kappa) else None
    if x_star is None:
        raise PlanError("reference rates are not complex-balanced")
    runs = run_trials(net, plan)
    verdict = global_stability_probe(net, plan, runs=runs)
    if args.variable_eps:
        envelope = permanence_probe(net, plan, variable_eps=args.variable_eps)
    else:
        envelope = permanence_probe(net, plan, runs=runs)
    if verdict.inconclusive:
        code = EXIT_INCONCLUSIVE
    elif verdict.all_unique and envelope.passed:
        code = EXIT_OK
    else:
        code = EXIT_NEGATIVE
    cfg_d = asdict(cfg)
    cfg_d["max_step"] = None if cfg_d["max_step"] == np.inf else cfg_d["max_step"]
    cfg_d["checkpoints"] = list(cfg_d["checkpoints"])
    out = {
        "plan": {
            "kappa_star": [float(v) for v in kappa.values],
            "eps": float(eps),
            "trials": args.trials,
            "seed": args.seed,
            "initial_conditions": [[float(v) for v in x] for x in ics],
            "variable_eps": args.variable_eps,
            "config": cfg_d,
        },
        "class_steady_state": [float(v) for v in x_star],
        "verdict": verdict.to_dict(),
        "envelope": envelope.to_dict(),
        "max_distance_to_reference": verdict.max_distance_to(x_star) if not verdict.inconclusive else None,
        "exit_code": code,
    }
    if verdict.inconclusive:
        log.error("inconclusive trials: %s", verdict.inconclusive)
    _emit(crnio.dumps(out), args.out)
    return code


def _toric_ok(net, kappa) -> bool:
    if not net.analysis.weakly_reversible:
        raise PlanError("network is not weakly reversible")
    return toric_membership(net, kappa)[0]


def cmd_bifurcate(args) -> int:
    if args.net:
        net, _ = _read_network(args.net, args.mode)
    else:
        net = parse_network_with_rates(CUBIC_DSL)[0]
    k1s = _parse_grid(args.kappa1)
    k2s = _parse_grid(args.kappa2)
    points = bifurcation_scan_1d(net, [(a, b) for a in k1s for b in k2s])
    rows = [
        {"kappa1": p.kappa1, "kappa2": p.kappa2, "root": s.root, "eigenvalue": s.eigenvalue,
         "stability": s.stability, "multiplicity": s.multiplicity}
        for p in points for s in p.steady_states
    ]
    if args.format == "csv":
        _emit(crnio.rows_to_csv(rows, ["kappa1", "kappa2", "root", "eigenvalue", "stability"]), args.out)
    else:
        _emit(crnio.dumps(rows), args.out)
    return EXIT_OK


def cmd_equiv(args) -> int:
    if args.sweep:
        need = [args.a1, args.a5, args.kappa2, args.kappa3, args.kappa4]
        if any(v is None for v in need):
            raise UsageError("--sweep needs --a1 --a5 --kappa2 --kappa3 --kappa4 (grids for kappa3/kappa4)")
        rows = region_sweep(float(args.a1), float(args.a5), float(args.kappa2),
                            _parse_grid(args.kappa3), _parse_grid(args.kappa4))
        _emit(crnio.rows_to_csv(rows, ["kappa3", "kappa4", "ratio", "verdict"]), args.out)
        return EXIT_OK
    if args.a1 is not None:
        vals = [args.a1, args.a5, args.kappa2, args.kappa3, args.kappa4]
        if any(v is None for v in vals):
            raise UsageError("region check needs --a1 --a5 --kappa2 --kappa3 --kappa4")
        v = cb_region_probe_ex45(*(float(x) for x in vals))
        _emit(crnio.dumps(v.to_dict()), args.out)
        return EXIT_OK
    if len(args.networks) != 2:
        raise UsageError("equiv needs two network files (or --a1 ... for the region check)")
    net_a, inline_a = _read_network(args.networks[0], args.mode)
    net_b, inline_b = _read_network(args.networks[1], args.mode)
    k_a = load_rates(net_a, args.rates) if args.rates else inline_a
    k_b = load_rates(net_b, args.rates2) if args.rates2 else inline_b
    if k_a is None or k_b is None:
        raise UsageError("rates missing: pass --rates/--rates2 or annotate the network files")
    k_a = k_a if isinstance(k_a, RateAssignment) else RateAssignment.of(net_a, k_a)
    k_b = k_b if isinstance(k_b, RateAssignment) else RateAssignment.of(net_b, k_b)
    equiv, gap = dynamically_equivalent((net_a, k_a), (net_b, k_b))
    _emit(crnio.dumps({"equivalent": equiv, "max_coeff_gap": gap, "species": list(net_a.species)}), args.out)
    return EXIT_OK if equiv else EXIT_NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crnstab", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, rates=True, integ=False):
        sp.add_argument("--net", required=True, help="network DSL file")
        sp.add_argument("--mode", choices=["integer", "real"], default="integer")
        if rates:
            sp.add_argument("--rates", help="JSON rates keyed by canonical reaction text")
            sp.add_argument("--x0", help="comma-separated positive state")
        if integ:
            sp.add_argument("--t-end", type=float, default=PROBE_CONFIG.t_end)
            sp.add_argument("--rel-tol", type=float, default=PROBE_CONFIG.rel_tol)
            sp.add_argument("--abs-tol", type=float, default=PROBE_CONFIG.abs_tol)
        sp.add_argument("--out")

    common(sub.add_parser("analyze", help="structural report"), rates=False)
    common(sub.add_parser("check-cb", help="complex-balance report"))
    sp = sub.add_parser("simulate", help="integrate a mass-action system")
    common(sp, integ=True)
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    sp = sub.add_parser("perturb", help="rate-perturbation stability and permanence probes")
    common(sp, integ=True)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--variable-eps", type=float, help="run the permanence probe with time-varying rates")
    sp.add_argument("--format", choices=["json"], default="json")

    sp = sub.add_parser("bifurcate", help="steady states of 0 <-> X, 2X <-> 3X over a rate grid")
    sp.add_argument("--net", help="network file (defaults to the built-in 0 <-> X, 2X <-> 3X)")
    sp.add_argument("--mode", choices=["integer", "real"], default="integer")
    sp.add_argument("--kappa1", default="1")
    sp.add_argument("--kappa2", default="0.5:6:12")
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    sp.add_argument("--out")

    sp = sub.add_parser("equiv", help="dynamical equivalence and the strip region check")
    sp.add_argument("networks", nargs="*")
    sp.add_argument("--mode", choices=["integer", "real"], default="integer")
    sp.add_argument("--rates")
    sp.add_argument("--rates2")
    sp.add_argument("--sweep", action="store_true")
    for name in ("a1", "a5", "kappa2", "kappa3", "kappa4"):
        sp.add_argument(f"--{name}")
    sp.add_argument("--format", choices=["csv", "json"], default="json")
    sp.add_argument("--out")
    return p


COMMANDS = {
    "analyze": cmd_analyze, "check-cb": cmd_check_cb, "simulate": cmd_simulate,
    "perturb": cmd_perturb, "bifurcate": cmd_bifurcate, "equiv": cmd_equiv,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, NetworkError, RateError, NotWeaklyReversible, PlanError, ShapeError,
            SpeciesMismatch, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, IntegrationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
