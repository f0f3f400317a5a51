"""Steady states of 0 <-> X, 2X <-> 3X (kappa4 = kappa1, kappa3 = kappa2) over a
kappa2 grid, as plot-ready CSV: one row per positive steady state.

The field is kappa1 - kappa2 x + kappa2 x^2 - kappa1 x^3; x = 1 is always a
root, and two more appear once kappa2 > 3 kappa1.

    python3 scripts/bifurcation_scan.py --kappa2-max 8 --points 281 --out results/bifurcation.csv
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from crnstab.io import rows_to_csv
from crnstab.network import load_network
from crnstab.robustness import bifurcation_scan_1d

ROOT = Path(__file__).resolve().parents[1]


@dataclass
class ScanConfig:
    network: str = str(ROOT / "networks" / "cubic.crn")
    kappa1: float = 1.0
    kappa2_min: float = 0.5
    kappa2_max: float = 6.0
    points: int = 221
    out: str | None = None


def run(cfg: ScanConfig) -> list[dict]:
    net = load_network(cfg.network)
    grid = np.linspace(cfg.kappa2_min, cfg.kappa2_max, cfg.points)
    rows = []
    for p in bifurcation_scan_1d(net, [(cfg.kappa1, float(k2)) for k2 in grid]):
        for s in p.steady_states:
            rows.append({"kappa1": p.kappa1, "kappa2": p.kappa2, "root": s.root,
                         "eigenvalue": s.eigenvalue, "stability": s.stability})
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--kappa1", type=float, default=ScanConfig.kappa1)
    ap.add_argument("--kappa2-min", type=float, default=ScanConfig.kappa2_min)
    ap.add_argument("--kappa2-max", type=float, default=ScanConfig.kappa2_max)
    ap.add_argument("--points", type=int, default=ScanConfig.points)
    ap.add_argument("--out")
    a = ap.parse_args()
    cfg = ScanConfig(kappa1=a.kappa1, kappa2_min=a.kappa2_min, kappa2_max=a.kappa2_max, points=a.points, out=a.out)
    rows = run(cfg)
    text = rows_to_csv(rows, ["kappa1", "kappa2", "root", "eigenvalue", "stability"])
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(text)
        bistable = sorted({r["kappa2"] for r in rows if r["stability"] == "unstable"})
        onset = f"{bistable[0]:g}" if bistable else "none"
        print(f"{len(rows)} rows -> {cfg.out}; first kappa2 with three steady states: {onset}")
    else:
        print(text, end="")


if __name__ == "__main__":
    main()
