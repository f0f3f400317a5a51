"""Sweep the rate-perturbation radius on the deficiency-one triangle network.

For each eps, samples kappa uniformly in the eps-ball around a complex-balanced
kappa*, integrates from several points of one compatibility class and records
whether all trajectories share a limit, how far that limit sits from the
unperturbed steady state and the permanence box margin.

    python3 scripts/perturbation_probe.py --trials 20 --out results/probe.json
"""
from __future__ import annotations

import argparse
import json
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from crnstab.complex_balance import solve_cb_steady_state
from crnstab.kinetics import RateAssignment
from crnstab.network import load_network
from crnstab.robustness import (PROBE_CONFIG, PerturbationPlan, default_initial_conditions, global_stability_probe,
                                permanence_envelope, run_trials)

ROOT = Path(__file__).resolve().parents[1]


@dataclass
class ProbeConfig:
    network: str = str(ROOT / "networks" / "triangle.crn")
    kappa_star: tuple[float, ...] = (1, 2, 2, 2, 1)
    x0: tuple[float, ...] = (3.0, 1.0, 1.0)
    eps_values: tuple[float, ...] = (0.2, 0.1, 0.05, 0.02, 0.01)
    trials: int = 20
    seed: int = 42
    t_end: float = PROBE_CONFIG.t_end
    out: str | None = None


def run(cfg: ProbeConfig) -> dict:
    net = load_network(cfg.network)
    kappa = RateAssignment.of(net, cfg.kappa_star)
    ics = default_initial_conditions(net, np.array(cfg.x0))
    x_star = solve_cb_steady_state(net, kappa, np.array(cfg.x0))
    integ = replace(PROBE_CONFIG, t_end=cfg.t_end)
    rows = []
    for eps in cfg.eps_values:
        t0 = time.perf_counter()
        plan = PerturbationPlan(kappa, eps, cfg.trials, cfg.seed, ics, integ)
        runs = run_trials(net, plan)
        verdict = global_stability_probe(net, plan, runs=runs)
        env = permanence_envelope(runs, integ.t_end)
        rows.append({
            "eps": eps,
            "all_unique": verdict.all_unique,
            "inconclusive": verdict.inconclusive,
            "max_gap": max((t.max_gap or 0.0) for t in verdict.per_trial),
            "max_distance": verdict.max_distance_to(x_star) if not verdict.inconclusive else None,
            "margin_to_boundary": env.margin_to_boundary,
            "seconds": round(time.perf_counter() - t0, 2),
        })
        dist = rows[-1]["max_distance"]
        print(f"eps={eps:<6g} unique={verdict.all_unique!s:<5} "
              f"max|x(k)-x*|={'n/a' if dist is None else f'{dist:.3e}'} margin={env.margin_to_boundary:.3f}")
    return {"config": asdict(cfg), "steady_state": x_star.tolist(), "rows": rows}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--trials", type=int, default=ProbeConfig.trials)
    ap.add_argument("--seed", type=int, default=ProbeConfig.seed)
    ap.add_argument("--eps", type=float, nargs="+", default=list(ProbeConfig.eps_values))
    ap.add_argument("--t-end", type=float, default=ProbeConfig.t_end)
    ap.add_argument("--out")
    a = ap.parse_args()
    cfg = ProbeConfig(eps_values=tuple(a.eps), trials=a.trials, seed=a.seed, t_end=a.t_end, out=a.out)
    result = run(cfg)
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(json.dumps(result, indent=2) + "\n")


if __name__ == "__main__":
    main()
