"""Complex-balancing: Matrix-Tree constants, toric-locus membership, the
Birch-parametrized steady-state solve and linear stability at the steady state."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .kinetics import MassActionField, RateAssignment, _kappa_array, jacobian, rhs
from .network import ReactionNetwork, StoichAnalysis, require_positive

TORIC_TOL = 1e-8
CENTRE_TOL = 1e-8
NEWTON_MAX_ITER = 50
NEWTON_STEP_TOL = 1e-12


class NotWeaklyReversible(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, last_iterate: np.ndarray, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.last_iterate = last_iterate
        self.residual = residual


class NotComplexBalanced(ValueError):
    pass


@dataclass(frozen=True)
class TreeConstants:
    K: tuple
    exact: bool = False

    def as_array(self) -> np.ndarray:
        return np.array([float(k) for k in self.K], dtype=float)

    def __getitem__(self, i):
        return self.K[i]

    def __len__(self):
        return len(self.K)


def laplacian(net: ReactionNetwork, kappa, exact: bool = False):
    """Column-convention Laplacian: L[i, j] = kappa_ji for i != j and
    L[j, j] = -(total outflow rate of j), so L @ K = 0 for tree constants K."""
    m = net.m
    if exact:
        L = [[Fraction(0)] * m for _ in range(m)]
        vals = [Fraction(v) for v in kappa.values]
    else:
        L = np.zeros((m, m))
        vals = list(_kappa_array(net, kappa))
    for (i, j), k in zip(net.edges, vals):
        L[j][i] += k
        L[i][i] -= k
    return L


def _det_exact(mat: list[list[Fraction]]) -> Fraction:
    """Bareiss fraction-free elimination; runs on plain ints when every entry is integral."""
    n = len(mat)
    if n == 0:
        return Fraction(1)
    integral = all(v.denominator == 1 for row in mat for v in row)
    a = [[int(v) for v in row] for row in mat] if integral else [row[:] for row in mat]
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            piv = next((r for r in range(k + 1, n) if a[r][k] != 0), None)
            if piv is None:
                return Fraction(0)
            a[k], a[piv] = a[piv], a[k]
            sign = -sign
        akk = a[k][k]
        for i in range(k + 1, n):
            aik = a[i][k]
            row_i, row_k = a[i], a[k]
            for j in range(k + 1, n):
                num = row_i[j] * akk - aik * row_k[j]
                row_i[j] = num // prev if integral else num / prev
        prev = akk
    return Fraction(sign * a[n - 1][n - 1])


def tree_constants(net: ReactionNetwork, kappa: RateAssignment, strict: bool = True,
                   exact: bool | None = None) -> TreeConstants:
    """K_i = weighted count of spanning in-trees rooted at i inside its linkage class.

    Computed as principal minors of the (out-degree) Laplacian of each
    linkage class. ``exact`` defaults to rational arithmetic when every rate
    is an int or Fraction. In lenient mode (``strict=False``) vertices with
    no in-tree get 0.
    """
    if strict and not net.is_weakly_reversible:
        raise NotWeaklyReversible("tree constants require a weakly reversible network")
    if exact is None:
        exact = isinstance(kappa, RateAssignment) and kappa.is_rational
    L = laplacian(net, kappa, exact)
    K: list = [None] * net.m
    for lc in net.linkage:
        for root in lc:
            rest = [v for v in lc if v != root]
            # minus sign per row: -L restricted is the out-degree Laplacian transpose
            if exact:
                sub = [[-L[a][b] for b in rest] for a in rest]
                K[root] = _det_exact(sub)
            else:
                sub = -np.asarray(L)[np.ix_(rest, rest)]
                K[root] = float(np.linalg.det(sub)) if rest else 1.0
    return TreeConstants(tuple(K), exact)


def cb_residual(net: ReactionNetwork, kappa, x) -> np.ndarray:
    """Per-vertex outflow minus inflow of the flux kappa_ij x^{y_i}."""
    x = require_positive(x)
    flux = MassActionField(net).fluxes(_kappa_array(net, kappa), x)
    res = np.zeros(net.m)
    np.add.at(res, net.sources, flux)
    np.subtract.at(res, net.targets, flux)
    return res


def _linkage_indicator(net: ReactionNetwork) -> np.ndarray:
    B = np.zeros((net.m, net.analysis.n_linkage))
    for c, lc in enumerate(net.analysis.linkage_classes):
        B[list(lc), c] = 1.0
    return B


def toric_membership(net: ReactionNetwork, kappa, K: TreeConstants | None = None) -> tuple[bool, float]:
    """Decide whether (net, kappa) is complex-balanced.

    Tests whether ln K lies in col(Y) + span(linkage indicators) by least
    squares; the residual is the norm of the unexplained part.
    """
    if not net.analysis.weakly_reversible:
        raise NotWeaklyReversible("toric membership requires a weakly reversible network")
    if K is None:
        K = tree_constants(net, kappa)
    logK = np.log(K.as_array())
    A = np.hstack([net.Y, _linkage_indicator(net)])
    sol, *_ = np.linalg.lstsq(A, logK, rcond=None)
    res = float(np.linalg.norm(logK - A @ sol))
    return res <= TORIC_TOL, res


def reference_steady_state(net: ReactionNetwork, kappa, K: TreeConstants | None = None) -> np.ndarray:
    """One positive complex-balanced steady state x_ref with x_ref^{y_i} = c K_i.

    Prefers c = 1 in every linkage class when that is consistent.
    """
    ok, res = toric_membership(net, kappa, K)
    if not ok:
        raise NotComplexBalanced(f"rates are not on the toric locus (residual {res:.3e})")
    if K is None:
        K = tree_constants(net, kappa)
    logK = np.log(K.as_array())
    u, *_ = np.linalg.lstsq(net.Y, logK, rcond=None)
    if np.linalg.norm(net.Y @ u - logK) > TORIC_TOL:
        A = np.hstack([net.Y, _linkage_indicator(net)])
        sol, *_ = np.linalg.lstsq(A, logK, rcond=None)
        u = sol[: net.n]
    return np.exp(u)


def solve_cb_steady_state(net: ReactionNetwork, kappa, x0, guess=None,
                          max_iter: int = NEWTON_MAX_ITER, step_tol: float = NEWTON_STEP_TOL) -> np.ndarray:
    """The complex-balanced steady state in the compatibility class of ``x0``.

    Writes x = x_ref * exp(W a) with W an orthonormal basis of S-perp and
    Newton-solves W^T (x - x0) = 0, i.e. minimizes the strictly convex
    sum(x) - x0 . (W a), with step halving. ``guess`` is an optional positive
    starting state.
    """
    x0 = require_positive(x0, "initial state")
    x_ref = reference_steady_state(net, kappa)
    W = net.analysis.complement_basis.T  # n x (n - s)
    if W.shape[1] == 0:
        return x_ref
    lref = np.log(x_ref)
    c0 = W.T @ x0

    def phi(a):
        with np.errstate(over="ignore"):
            return float(np.sum(np.exp(lref + W @ a)) - c0 @ a)

    start = x0 if guess is None else require_positive(guess, "initial guess")
    a = W.T @ (np.log(start) - lref)
    f = phi(a)
    for _ in range(max_iter):
        x = np.exp(lref + W @ a)
        g = W.T @ x - c0
        H = (W.T * x) @ W
        step = -np.linalg.solve(H, g)
        if np.max(np.abs(step)) < step_tol:
            a = a + step
            return np.exp(lref + W @ a)
        t = 1.0
        while np.max(np.abs(step)) > 1e-6:
            f_new = phi(a + t * step)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * t * (g @ step):
                break
            t *= 0.5
            if t < 1e-12:
                break
        a = a + t * step
        f = phi(a)
    x = np.exp(lref + W @ a)
    raise ConvergenceError("Newton solve did not converge", x, float(np.linalg.norm(W.T @ (x - x0))))


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    centre: np.ndarray
    transverse: np.ndarray
    stable: bool

    @property
    def n_centre(self) -> int:
        return len(self.centre)


def linear_stability(net: ReactionNetwork, kappa, x_star, stoich: StoichAnalysis | None = None,
                     steady_tol: float = 1e-8) -> SpectrumReport:
    """Eigenvalues of the Jacobian at a steady state, split into the n - s
    centre directions (transverse to compatibility classes) and the s
    directions inside the class."""
    x_star = require_positive(x_star)
    stoich = stoich or net.analysis
    f = rhs(net, kappa, x_star)
    scale = float(np.max(np.abs(MassActionField(net).fluxes(_kappa_array(net, kappa), x_star)))) or 1.0
    if np.linalg.norm(f) > steady_tol * scale:
        raise ValueError(f"x_star is not a steady state (|f| = {np.linalg.norm(f):.3e})")
    ev = np.linalg.eigvals(jacobian(net, kappa, x_star))
    order = np.argsort(np.abs(ev.real), kind="stable")
    ev = ev[order]
    n_c = net.n - stoich.dim_S
    centre, transverse = ev[:n_c], ev[n_c:]
    stable = bool(np.all(np.abs(centre.real) <= CENTRE_TOL) and np.all(transverse.real < 0))
    return SpectrumReport(ev, centre, transverse, stable)


@dataclass
class CBReport:
    tree_constants: TreeConstants
    is_complex_balanced: bool
    membership_residual: float
    steady_state: np.ndarray | None
    per_vertex_residuals: np.ndarray
    spectrum: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    def to_dict(self, net: ReactionNetwork) -> dict:
        return {
            "complexes": [net.complex_str(i) for i in range(net.m)],
            "tree_constants": [float(k) for k in self.tree_constants.K],
            "is_complex_balanced": bool(self.is_complex_balanced),
            "membership_residual": float(self.membership_residual),
            "steady_state": None if self.steady_state is None else [float(v) for v in self.steady_state],
            "per_vertex_residuals": [float(v) for v in self.per_vertex_residuals],
            "spectrum": [[float(z.real), float(z.imag)] for z in self.spectrum],
        }


def check_complex_balance(net: ReactionNetwork, kappa: RateAssignment, x0: Sequence[float] | None = None,
                          residual_tol: float = 1e-10) -> CBReport:
    """Full complex-balance report. With ``x0`` the steady state is the one in
    its compatibility class; otherwise the reference point (c = 1) is used."""
    K = tree_constants(net, kappa)
    ok, res = toric_membership(net, kappa, K)
    if not ok:
        return CBReport(K, False, res, None, np.zeros(0))
    x = solve_cb_steady_state(net, kappa, x0) if x0 is not None else reference_steady_state(net, kappa, K)
    per_vertex = cb_residual(net, kappa, x)
    spec = linear_stability(net, kappa, x)
    flux = MassActionField(net).fluxes(_kappa_array(net, kappa), x)
    balanced = bool(np.max(np.abs(per_vertex)) <= residual_tol * max(1.0, float(np.max(flux))))
    return CBReport(K, balanced, res, x, per_vertex, spec.eigenvalues)
