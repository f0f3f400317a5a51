"""Shared constants and network generators for the test suite."""
from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np
from hypothesis import strategies as st

from crnstab.kinetics import RateAssignment
from crnstab.network import ReactionNetwork

NETWORKS = Path(__file__).resolve().parents[1] / "networks"

CB_RATES = (1, 2, 2, 2, 1)
CB_STATE = np.array([2.0, 4 ** (1 / 3), 2 ** (1 / 3)])


def unit_network(k: int, arcs) -> ReactionNetwork:
    """Digraph on k vertices realized with unit-vector complexes."""
    names = tuple(f"S{i}" for i in range(k))
    cx = tuple(tuple(Fraction(int(i == s)) for s in range(k)) for i in range(k))
    return ReactionNetwork(names, cx, tuple(arcs))


@st.composite
def networks(draw, max_species: int = 4, max_complexes: int = 6, max_coeff: int = 3,
             weakly_reversible: bool = False):
    """Random valid networks over small integer complexes."""
    n = draw(st.integers(1, max_species))
    m = draw(st.integers(2, min(max_complexes, (max_coeff + 1) ** n)))
    vec = st.tuples(*[st.integers(0, max_coeff) for _ in range(n)])
    cx = draw(st.lists(vec, min_size=m, max_size=m, unique=True))
    if weakly_reversible:
        # union of directed cycles over random vertex subsets, covering every vertex
        order = draw(st.permutations(range(m)))
        edges = {(order[i], order[(i + 1) % m]) for i in range(m)}
        extra = draw(st.lists(st.permutations(range(m)).map(lambda p: p[:3]), max_size=2))
        for cyc in extra:
            edges |= {(cyc[i], cyc[(i + 1) % len(cyc)]) for i in range(len(cyc))}
    else:
        pairs = [(i, j) for i in range(m) for j in range(m) if i != j]
        edges = set(draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=2 * m)))
        # cover isolated vertices
        for v in range(m):
            if not any(v in e for e in edges):
                edges.add((v, (v + 1) % m))
    names = tuple(f"S{i}" for i in range(n))
    return ReactionNetwork(names, tuple(tuple(Fraction(c) for c in v) for v in cx), tuple(sorted(edges)))


def random_rates(net: ReactionNetwork, rng: np.random.Generator, lo: float = 0.2, hi: float = 5.0):
    return RateAssignment.of(net, rng.uniform(lo, hi, net.r))


def random_network(rng: np.random.Generator, n: int, m: int, max_coeff: int = 2,
                   weakly_reversible: bool = False) -> ReactionNetwork:
    """numpy-driven counterpart of ``networks`` for seeded loops."""
    m = min(m, (max_coeff + 1) ** n)
    seen: set[tuple[int, ...]] = set()
    while len(seen) < m:
        seen.add(tuple(int(v) for v in rng.integers(0, max_coeff + 1, n)))
    cx = sorted(seen)
    perm = rng.permutation(m)
    edges = {(int(perm[i]), int(perm[(i + 1) % m])) for i in range(m)}
    if not weakly_reversible:
        edges = {(int(perm[i]), int(perm[i + 1])) for i in range(m - 1)}
        for _ in range(int(rng.integers(0, m))):
            i, j = (int(v) for v in rng.choice(m, 2, replace=False))
            edges.add((i, j))
    names = tuple(f"S{i}" for i in range(n))
    return ReactionNetwork(names, tuple(tuple(Fraction(c) for c in v) for v in cx), tuple(sorted(edges)))
