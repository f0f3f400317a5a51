"""Dynamical equivalence of mass-action systems and the square-with-diagonal
reparametrization that realizes a non-balanced system as a complex-balanced one."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import sympy

from .complex_balance import toric_membership
from .kinetics import RateAssignment
from .network import ReactionNetwork, parse_network

EQUIV_RTOL = 1e-12
LOCUS_TOL = 1e-10

SQUARE_DIAG = """\
0 -> X
X -> X+Y
X+Y -> Y
Y -> 0
0 -> X+Y
"""

# same square with an extra 0 -> Y edge; rates (k1, k2, k3, k4, k5, k6)
SQUARE_DIAG_DE = """\
0 -> X
X -> X+Y
X+Y -> Y
Y -> 0
0 -> X+Y
0 -> Y
"""


class SpeciesMismatch(ValueError):
    pass


PolynomialMap = dict  # exponent tuple -> coefficient tuple


def polynomial_map(net: ReactionNetwork, kappa: RateAssignment) -> PolynomialMap:
    """Right-hand side collected by source monomial: {y_i: sum_j kappa_ij (y_j - y_i)}.

    Exact (Fractions) when every rate is rational; zero coefficient vectors
    are dropped.
    """
    exact = kappa.is_rational
    out: dict[tuple, list] = {}
    for (i, j), k in zip(net.edges, kappa.values):
        yi, yj = net.complexes[i], net.complexes[j]
        coef = Fraction(k) if exact else float(k)
        diff = [coef * (b - a) if exact else coef * float(b - a) for a, b in zip(yi, yj)]
        acc = out.setdefault(yi, [Fraction(0) if exact else 0.0] * net.n)
        for s in range(net.n):
            acc[s] += diff[s]
    return {key: tuple(v) for key, v in out.items() if any(c != 0 for c in v)}


def _reorder(pmap: PolynomialMap, perm: list[int]) -> PolynomialMap:
    return {tuple(k[p] for p in perm): tuple(v[p] for p in perm) for k, v in pmap.items()}


def dynamically_equivalent(sys_a: tuple[ReactionNetwork, RateAssignment],
                           sys_b: tuple[ReactionNetwork, RateAssignment],
                           rtol: float = EQUIV_RTOL) -> tuple[bool, float]:
    """Compare the two polynomial right-hand sides. Returns (equivalent, max coefficient gap).

    Species are matched by name; the gap is absolute, the decision uses
    ``rtol`` relative to the largest coefficient (exact equality when both
    systems have rational rates).
    """
    net_a, k_a = sys_a
    net_b, k_b = sys_b
    if set(net_a.species) != set(net_b.species):
        raise SpeciesMismatch(f"species differ: {sorted(net_a.species)} vs {sorted(net_b.species)}")
    pa = polynomial_map(net_a, k_a)
    pb = _reorder(polynomial_map(net_b, k_b), [net_b.species.index(s) for s in net_a.species])
    zero = (0,) * net_a.n
    gap = Fraction(0) if (k_a.is_rational and k_b.is_rational) else 0.0
    big = 0.0
    for key in set(pa) | set(pb):
        va, vb = pa.get(key, zero), pb.get(key, zero)
        for a, b in zip(va, vb):
            gap = max(gap, abs(a - b))
            big = max(big, abs(float(a)), abs(float(b)))
    if isinstance(gap, Fraction):
        return gap == 0, float(gap)
    return gap <= rtol * max(big, 1e-300), float(gap)


def _is_rational(*vals) -> bool:
    return all(isinstance(v, Rational) for v in vals)


@dataclass(frozen=True)
class Reparametrization:
    kappa1: float
    kappa5: float
    kappa6: float
    radical: float


def reparameterize_ex45(a1, a5, kappa2, kappa3, kappa4, exact: bool = False) -> Reparametrization | None:
    """Rates (k1, k5, k6) for the square-with-diagonal-and-0->Y network that
    reproduce the ODEs of the square-with-diagonal system with rates
    (a1, kappa2, kappa3, kappa4, a5) and make it complex-balanced.

    Feasible iff a1 < kappa2 kappa4 / kappa3 < a1 + 2 a5; returns None otherwise.
    With ``exact=True`` and rational inputs the values are exact sympy
    algebraic numbers, so k1 + k5 = a1 + a5 and k5 + k6 = a5 hold identically.
    """
    for v in (a1, a5, kappa2, kappa3, kappa4):
        if not v > 0:
            raise ValueError("all parameters must be strictly positive")
    rational = _is_rational(a1, a5, kappa2, kappa3, kappa4)
    if exact and not rational:
        raise ValueError("exact mode needs rational inputs")
    if rational:
        a1, a5 = Fraction(a1), Fraction(a5)
        ratio = Fraction(kappa2) * Fraction(kappa4) / Fraction(kappa3)
    else:
        ratio = kappa2 * kappa4 / kappa3
    if not (a1 < ratio < a1 + 2 * a5):
        return None
    if exact:
        a1, a5, ratio = (sympy.Rational(v.numerator, v.denominator) for v in (a1, a5, ratio))
        rad = sympy.sqrt(a5**2 + 4 * (a1 + a5) * ratio)
    else:
        a1, a5 = float(a1), float(a5)
        rad = math.sqrt(a5**2 + 4 * (a1 + a5) * float(ratio))
    k1 = (-a5 + rad) / 2
    k5 = (2 * a1 + 3 * a5 - rad) / 2
    k6 = (-2 * a1 - a5 + rad) / 2
    return Reparametrization(k1, k5, k6, rad)


def square_networks() -> tuple[ReactionNetwork, ReactionNetwork]:
    return parse_network(SQUARE_DIAG), parse_network(SQUARE_DIAG_DE)


def original_system(a1, a5, kappa2, kappa3, kappa4):
    net, _ = square_networks()
    return net, RateAssignment.of(net, [a1, kappa2, kappa3, kappa4, a5])


def equivalent_system(rep: Reparametrization, kappa2, kappa3, kappa4):
    _, net = square_networks()
    return net, RateAssignment.of(net, [rep.kappa1, kappa2, kappa3, kappa4, rep.kappa5, rep.kappa6])


@dataclass
class RegionVerdict:
    region: str  # on-toric-locus | inside-DE-strip | boundary | outside
    ratio: float
    toric_original: bool
    toric_equivalent: bool | None = None
    equivalent: bool | None = None
    reparametrization: Reparametrization | None = None

    def to_dict(self) -> dict:
        rep = self.reparametrization
        return {
            "region": self.region,
            "ratio": self.ratio,
            "toric_original": self.toric_original,
            "toric_equivalent": self.toric_equivalent,
            "equivalent": self.equivalent,
            "kappa1": rep.kappa1 if rep else None,
            "kappa5": rep.kappa5 if rep else None,
            "kappa6": rep.kappa6 if rep else None,
        }


class RegionCheckFailed(AssertionError):
    pass


def cb_region_probe_ex45(a1, a5, kappa2, kappa3, kappa4) -> RegionVerdict:
    """Classify parameters relative to the toric locus (ratio = a1) and the
    dynamical-equivalence strip a1 < ratio < a1 + 2 a5; inside the strip the
    reparametrized system must be complex-balanced and equivalent."""
    ratio = float(kappa2) * float(kappa4) / float(kappa3)
    net_a, k_a = original_system(a1, a5, kappa2, kappa3, kappa4)
    toric_a, _ = toric_membership(net_a, k_a)
    if abs(ratio - float(a1)) <= LOCUS_TOL * max(1.0, float(a1)):
        return RegionVerdict("on-toric-locus", ratio, toric_a)
    rep = reparameterize_ex45(a1, a5, kappa2, kappa3, kappa4)
    if rep is None:
        upper = float(a1) + 2 * float(a5)
        region = "boundary" if abs(ratio - upper) <= LOCUS_TOL * max(1.0, upper) else "outside"
        return RegionVerdict(region, ratio, toric_a)
    net_b, k_b = equivalent_system(rep, kappa2, kappa3, kappa4)
    toric_b, res_b = toric_membership(net_b, k_b)
    equiv, gap = dynamically_equivalent((net_a, k_a), (net_b, k_b))
    if not toric_b:
        raise RegionCheckFailed(f"reparametrized system not complex-balanced (residual {res_b:.3e})")
    if not equiv:
        raise RegionCheckFailed(f"reparametrized system not dynamically equivalent (gap {gap:.3e})")
    return RegionVerdict("inside-DE-strip", ratio, toric_a, toric_b, equiv, rep)


def region_sweep(a1, a5, kappa2, kappa3_grid, kappa4_grid) -> list[dict]:
    """Rows (kappa3, kappa4, ratio, verdict) over a grid, for the region surface plot."""
    rows = []
    for k3 in kappa3_grid:
        for k4 in kappa4_grid:
            v = cb_region_probe_ex45(a1, a5, kappa2, k3, k4)
            rows.append({"kappa3": float(k3), "kappa4": float(k4), "ratio": v.ratio, "verdict": v.region})
    return rows


def reparam_residual(rep: Reparametrization, kappa2, kappa3, kappa4) -> float:
    """Relative residual of k2 k4 (k1 + k5) = k1 k3 (k1 + k5 + k6)."""
    lhs = kappa2 * kappa4 * (rep.kappa1 + rep.kappa5)
    rhs_ = rep.kappa1 * kappa3 * (rep.kappa1 + rep.kappa5 + rep.kappa6)
    return abs(lhs - rhs_) / max(abs(lhs), abs(rhs_))


__all__ = [
    "PolynomialMap", "polynomial_map", "dynamically_equivalent", "reparameterize_ex45",
    "cb_region_probe_ex45", "region_sweep", "Reparametrization", "RegionVerdict", "SpeciesMismatch",
    "square_networks", "original_system", "equivalent_system", "reparam_residual",
]
