"""Serialization helpers and the JSON schemas shipped with the package."""
from __future__ import annotations

import csv
import io
import json
from importlib import resources

from .network import ReactionNetwork

SCHEMAS = ("analyze", "check_cb", "simulate", "perturb", "bifurcate", "equiv", "region")


def load_schema(name: str) -> dict:
    return json.loads(resources.files("crnstab.schemas").joinpath(f"{name}.json").read_text())


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({c: row[c] for c in columns})
    return buf.getvalue()


def structural_report(net: ReactionNetwork) -> dict:
    an = net.analysis
    return {
        "species": list(net.species),
        "complexes": [net.complex_str(i) for i in range(net.m)],
        "n": net.n,
        "m": net.m,
        "r": net.r,
        "l": an.n_linkage,
        "dimS": an.dim_S,
        "deficiency": an.deficiency,
        "weakly_reversible": an.weakly_reversible,
        "linkage_classes": [list(lc) for lc in an.linkage_classes],
        "strong_components": [list(sc) for sc in an.strong_components],
    }
