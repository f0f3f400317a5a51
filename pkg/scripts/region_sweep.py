"""Classify (kappa3, kappa4) for the square-with-diagonal system at fixed
a1, a5, kappa2: on the toric locus, inside the strip where an equivalent
complex-balanced realization exists, on its upper boundary, or outside.

Inside the strip every point is checked: the reparametrized six-reaction
system must be complex-balanced and generate the same ODEs.

    python3 scripts/region_sweep.py --points 41 --out results/region.csv
"""
from __future__ import annotations

import argparse
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from crnstab.equivalence import region_sweep
from crnstab.io import rows_to_csv


@dataclass
class SweepConfig:
    a1: float = 1.0
    a5: float = 1.0
    kappa2: float = 2.0
    kappa_min: float = 0.25
    kappa_max: float = 4.0
    points: int = 41
    out: str | None = None


def run(cfg: SweepConfig) -> list[dict]:
    grid = np.geomspace(cfg.kappa_min, cfg.kappa_max, cfg.points)
    return region_sweep(cfg.a1, cfg.a5, cfg.kappa2, grid, grid)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    for name in ("a1", "a5", "kappa2", "kappa_min", "kappa_max"):
        ap.add_argument(f"--{name.replace('_', '-')}", type=float, default=getattr(SweepConfig, name))
    ap.add_argument("--points", type=int, default=SweepConfig.points)
    ap.add_argument("--out")
    a = ap.parse_args()
    cfg = SweepConfig(a.a1, a.a5, a.kappa2, a.kappa_min, a.kappa_max, a.points, a.out)
    rows = run(cfg)
    text = rows_to_csv(rows, ["kappa3", "kappa4", "ratio", "verdict"])
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(text)
        counts = Counter(r["verdict"] for r in rows)
        print(f"{len(rows)} rows -> {cfg.out}: " + ", ".join(f"{k} {v}" for k, v in sorted(counts.items())))
    else:
        print(text, end="")


if __name__ == "__main__":
    main()
