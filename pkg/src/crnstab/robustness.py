"""Rate-perturbation experiments around a complex-balanced system.

These probes are falsification-oriented: finitely many rate samples and
initial conditions can refute, but never certify, global stability or
permanence.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .complex_balance import solve_cb_steady_state, toric_membership
from .dynamics import IntegrationError, IntegratorConfig, Trajectory, integrate, integrate_variable
from .kinetics import RateAssignment, RateSchedule, jacobian
from .network import ReactionNetwork, require_positive

LIMIT_RTOL = 1e-5

PROBE_CONFIG = IntegratorConfig(t_end=20.0, rel_tol=1e-10, abs_tol=1e-12)


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class PerturbationPlan:
    kappa_star: RateAssignment
    eps: float
    trials: int
    seed: int
    initial_conditions: tuple[np.ndarray, ...]
    cfg: IntegratorConfig = PROBE_CONFIG

    def __post_init__(self):
        if self.eps < 0:
            raise PlanError("eps must be nonnegative")
        if self.eps >= float(self.kappa_star.as_array().min()):
            raise PlanError(f"eps = {self.eps} must be smaller than the smallest rate constant")
        if self.trials < 1:
            raise PlanError("need at least one trial")
        if not 0 <= self.seed < 2**64:
            raise PlanError("seed must be a 64-bit unsigned integer")
        if not self.initial_conditions:
            raise PlanError("need at least one initial condition")
        ics = tuple(require_positive(x, "initial condition") for x in self.initial_conditions)
        object.__setattr__(self, "initial_conditions", ics)

    def validate(self, net: ReactionNetwork) -> None:
        if len(self.kappa_star) != net.r:
            raise PlanError("rate vector does not match the network")
        W = net.analysis.complement_basis
        ref = W @ self.initial_conditions[0]
        scale = max(1.0, float(np.max(np.abs(self.initial_conditions[0]))))
        for x in self.initial_conditions[1:]:
            if x.shape != (net.n,):
                raise PlanError("initial condition has the wrong dimension")
            if np.linalg.norm(W @ x - ref) > 1e-10 * scale:
                raise PlanError("initial conditions are not in one compatibility class")


def default_eps(kappa_star: RateAssignment) -> float:
    return 0.05 * float(np.linalg.norm(kappa_star.as_array()))


def default_initial_conditions(net: ReactionNetwork, x0, spread: float = 0.5) -> tuple[np.ndarray, ...]:
    """x0 plus points x0 +/- a * d for each orthonormal direction d of S.

    ``a`` is ``spread`` times the largest step keeping the point positive, so
    every point stays in the compatibility class of x0.
    """
    x0 = require_positive(x0, "initial condition")
    out = [x0]
    for d in net.analysis.stoich_basis:
        for sign in (1.0, -1.0):
            v = sign * d
            neg = v < 0
            reach = np.min(x0[neg] / -v[neg]) if np.any(neg) else 1.0
            out.append(x0 + spread * reach * v)
    return tuple(out)


def _rng(seed: int, trial_index: int) -> np.random.Generator:
    # Philox is counter-based; one 128-bit key per (seed, trial) gives disjoint streams
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(trial_index) << 64)))


def perturb_sample(plan: PerturbationPlan, trial_index: int) -> RateAssignment:
    """kappa* + u with u uniform in the Euclidean eps-ball."""
    k = plan.kappa_star.as_array()
    rng = _rng(plan.seed, trial_index)
    g = rng.standard_normal(k.size)
    radius = plan.eps * rng.random() ** (1.0 / k.size)
    u = radius * g / np.linalg.norm(g)
    return RateAssignment(tuple(float(v) for v in k + u))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CRN_THREADS", "1")))
    except ValueError:
        return 1


def _map_ordered(fn, items: Sequence):
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


@dataclass
class TrialRun:
    index: int
    kappa: RateAssignment
    trajectories: list[Trajectory | None]
    errors: list[str | None]
    schedule: RateSchedule | None = None


def _run_trial(net, plan: PerturbationPlan, index: int, variable_eps: float | None = None) -> TrialRun:
    kappa = perturb_sample(plan, index)
    sched = variable_schedule(kappa, plan.seed, index, variable_eps) if variable_eps else None
    trajs, errs = [], []
    for x0 in plan.initial_conditions:
        try:
            if sched is None:
                trajs.append(integrate(net, kappa, x0, plan.cfg))
            else:
                trajs.append(integrate_variable(net, sched, x0, plan.cfg))
            errs.append(None)
        except IntegrationError as e:
            trajs.append(e.trajectory)
            errs.append(str(e))
    return TrialRun(index, kappa, trajs, errs, sched)


def run_trials(net: ReactionNetwork, plan: PerturbationPlan, variable_eps: float | None = None) -> list[TrialRun]:
    plan.validate(net)
    return _map_ordered(lambda i: _run_trial(net, plan, i, variable_eps), list(range(plan.trials)))


def variable_schedule(kappa: RateAssignment, seed: int, index: int, eps_bound: float) -> RateSchedule:
    """Sinusoidal rates kappa_k * exp(a_k sin(w_k t + p_k)) kept inside [eps_bound, 1/eps_bound]."""
    k = kappa.as_array()
    lo, hi = eps_bound, 1.0 / eps_bound
    if np.any(k <= lo) or np.any(k >= hi):
        raise PlanError("base rates must lie strictly inside the schedule bounds")
    rng = np.random.Generator(np.random.Philox(key=int(seed) + (int(index) << 64) + (1 << 127)))
    room = np.minimum(np.log(hi / k), np.log(k / lo))
    amp = np.minimum(0.5, 0.9 * room) * rng.random(k.size)
    omega = rng.uniform(0.5, 2.0, k.size)
    phase = rng.uniform(0.0, 2 * np.pi, k.size)
    funcs = tuple(
        (lambda t, kk=float(kk), a=float(a), w=float(w), p=float(p): kk * np.exp(a * np.sin(w * t + p)))
        for kk, a, w, p in zip(k, amp, omega, phase)
    )
    return RateSchedule(funcs, eps_bound)


def _max_pairwise_gap(limits: list[np.ndarray]) -> float:
    if len(limits) < 2:
        return 0.0
    scale = max(float(np.max(np.abs(x))) for x in limits)
    return max(float(np.max(np.abs(a - b))) for a, b in combinations(limits, 2)) / scale


@dataclass
class TrialVerdict:
    index: int
    kappa: list[float]
    limits: list[list[float] | None]
    max_gap: float | None
    conclusive: bool
    errors: list[str]

    @property
    def attractor(self) -> np.ndarray | None:
        return np.array(self.limits[0]) if self.conclusive else None


@dataclass
class StabilityVerdict:
    per_trial: list[TrialVerdict]
    all_unique: bool
    inconclusive: list[int]
    tolerance: float = LIMIT_RTOL

    @property
    def estimated_attractor_map(self) -> list[tuple[list[float], list[float]]]:
        return [(t.kappa, t.limits[0]) for t in self.per_trial if t.conclusive]

    def max_distance_to(self, x_star) -> float:
        x_star = np.asarray(x_star, dtype=float)
        return max(float(np.linalg.norm(np.array(x) - x_star)) for _, x in self.estimated_attractor_map)

    def to_dict(self) -> dict:
        return {
            "all_unique": self.all_unique,
            "tolerance": self.tolerance,
            "inconclusive_trials": self.inconclusive,
            "trials": [
                {"index": t.index, "kappa": t.kappa, "limits": t.limits, "max_gap": t.max_gap,
                 "conclusive": t.conclusive, "errors": t.errors}
                for t in self.per_trial
            ],
        }


def stability_verdict(runs: list[TrialRun], tol: float = LIMIT_RTOL) -> StabilityVerdict:
    out = []
    for run in runs:
        limits = [None if tr is None else tr.converged_to for tr in run.trajectories]
        errs = [e for e in run.errors if e]
        conclusive = not errs and all(x is not None for x in limits)
        gap = _max_pairwise_gap(limits) if conclusive else None
        out.append(TrialVerdict(
            run.index, [float(v) for v in run.kappa.values],
            [None if x is None else [float(v) for v in x] for x in limits],
            gap, conclusive, errs,
        ))
    inconclusive = [t.index for t in out if not t.conclusive]
    all_unique = not inconclusive and all(t.max_gap <= tol for t in out)
    return StabilityVerdict(out, all_unique, inconclusive, tol)


def _check_complex_balanced(net: ReactionNetwork, kappa_star: RateAssignment) -> None:
    ok, res = toric_membership(net, kappa_star)
    if not ok:
        raise PlanError(f"reference rates are not complex-balanced (toric residual {res:.3e})")


def global_stability_probe(net: ReactionNetwork, plan: PerturbationPlan,
                           runs: list[TrialRun] | None = None) -> StabilityVerdict:
    """Integrate every sampled system from every initial condition and check
    that all trajectories of a trial share one limit. Trials whose
    integrations fail or never settle are reported inconclusive, never as passes."""
    _check_complex_balanced(net, plan.kappa_star)
    return stability_verdict(runs if runs is not None else run_trials(net, plan))


@dataclass
class PermanenceEnvelope:
    window_start: float
    box_lo: np.ndarray
    box_hi: np.ndarray
    margin_to_boundary: float
    passed: bool
    failures: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "window_start": self.window_start,
            "box_lo": [float(v) for v in self.box_lo],
            "box_hi": [float(v) for v in self.box_hi],
            "margin_to_boundary": float(self.margin_to_boundary),
            "passed": self.passed,
            "failures": self.failures,
        }


def permanence_envelope(runs: list[TrialRun], t_end: float, window_fraction: float = 0.5) -> PermanenceEnvelope:
    start = (1.0 - window_fraction) * t_end
    lo = hi = None
    failures = []
    for run in runs:
        for ic, (tr, err) in enumerate(zip(run.trajectories, run.errors)):
            if err:
                failures.append({"trial": run.index, "initial_condition": ic,
                                 "kappa": [float(v) for v in run.kappa.values], "error": err})
                continue
            tail = tr.states[tr.times >= start]
            if tail.size == 0:
                tail = tr.states[-1:]
            tlo, thi = tail.min(axis=0), tail.max(axis=0)
            lo = tlo if lo is None else np.minimum(lo, tlo)
            hi = thi if hi is None else np.maximum(hi, thi)
    if lo is None:
        return PermanenceEnvelope(start, np.zeros(0), np.zeros(0), 0.0, False, failures)
    margin = float(lo.min())
    passed = not failures and margin > 0 and bool(np.all(np.isfinite(hi)))
    return PermanenceEnvelope(start, lo, hi, margin, passed, failures)


def permanence_probe(net: ReactionNetwork, plan: PerturbationPlan, window_fraction: float = 0.5,
                     variable_eps: float | None = None, runs: list[TrialRun] | None = None) -> PermanenceEnvelope:
    """Late-time bounding box of all trial trajectories.

    With ``variable_eps`` each trial uses a time-varying sinusoidal schedule
    bounded in [variable_eps, 1/variable_eps] around its sampled rates.
    """
    if runs is None:
        runs = run_trials(net, plan, variable_eps)
    return permanence_envelope(runs, plan.cfg.t_end, window_fraction)


def class_steady_state(net: ReactionNetwork, plan: PerturbationPlan) -> np.ndarray:
    return solve_cb_steady_state(net, plan.kappa_star, plan.initial_conditions[0])


# ---------------------------------------------------------------------------
# one-species bifurcation scan (0 <-> X, 2X <-> 3X)

_SHAPE = {((0,), (1,)): "k1", ((1,), (0,)): "k2", ((2,), (3,)): "k3", ((3,), (2,)): "k4"}


class ShapeError(ValueError):
    pass


def _edge_roles(net: ReactionNetwork) -> dict[str, int]:
    if net.n != 1:
        raise ShapeError("bifurcation scan needs a one-species network")
    roles = {}
    for k, (i, j) in enumerate(net.edges):
        key = ((int(net.complexes[i][0]),), (int(net.complexes[j][0]),))
        if key not in _SHAPE or not net.integral:
            raise ShapeError(f"unexpected reaction {net.reaction_str(k)}")
        roles[_SHAPE[key]] = k
    if len(roles) != 4:
        raise ShapeError("network must be exactly 0 <-> X, 2X <-> 3X")
    return roles


@dataclass
class SteadyState:
    root: float
    eigenvalue: float
    stability: str
    multiplicity: int = 1


@dataclass
class BifurcationPoint:
    kappa1: float
    kappa2: float
    steady_states: list[SteadyState]


def _poly_coeffs(net: ReactionNetwork, kappa: np.ndarray) -> np.ndarray:
    """Coefficients (highest degree first) of the one-species vector field."""
    deg = int(net.Y.max())
    c = np.zeros(deg + 1)
    for k, (i, j) in enumerate(net.edges):
        yi, yj = net.Y[i, 0], net.Y[j, 0]
        c[deg - int(yi)] += kappa[k] * (yj - yi)
    return np.trim_zeros(c, "f")


def positive_real_roots(coeffs: np.ndarray, cluster_tol: float = 1e-4, imag_tol: float = 1e-9) -> list[tuple[float, int]]:
    """Positive real roots via companion-matrix eigenvalues, merging clusters
    (multiple roots) by their mean and polishing simple roots with Newton."""
    roots = np.roots(coeffs)
    clusters: list[list[complex]] = []
    for z in sorted(roots, key=lambda z: (z.real, z.imag)):
        for cl in clusters:
            if abs(z - np.mean(cl)) <= cluster_tol * max(1.0, abs(z)):
                cl.append(z)
                break
        else:
            clusters.append([z])
    dp = np.polyder(coeffs)
    out = []
    for cl in clusters:
        z = complex(np.mean(cl))
        if abs(z.imag) > imag_tol * max(1.0, abs(z)) or z.real <= 0:
            continue
        x = z.real
        if len(cl) == 1:
            for _ in range(5):
                d = np.polyval(dp, x)
                if d == 0:
                    break
                x -= np.polyval(coeffs, x) / d
        out.append((float(x), len(cl)))
    return sorted(out)


def _classify(ev: float, tol: float = 1e-9) -> str:
    if abs(ev) <= tol:
        return "degenerate"
    return "stable" if ev < 0 else "unstable"


def bifurcation_scan_1d(net: ReactionNetwork, kappa_grid: Sequence[tuple[float, float]]) -> list[BifurcationPoint]:
    """Steady states of 0 <-> X, 2X <-> 3X with kappa4 = kappa1 and kappa3 = kappa2.

    ``kappa1`` is the rate of 0 -> X and ``kappa2`` that of X -> 0.
    """
    roles = _edge_roles(net)
    out = []
    for k1, k2 in kappa_grid:
        kappa = np.zeros(4)
        for name, v in (("k1", k1), ("k2", k2), ("k3", k2), ("k4", k1)):
            kappa[roles[name]] = v
        kap = RateAssignment.of(net, kappa)
        states = []
        for root, mult in positive_real_roots(_poly_coeffs(net, kappa)):
            ev = float(jacobian(net, kap, [root])[0, 0])
            states.append(SteadyState(root, ev, _classify(ev), mult))
        out.append(BifurcationPoint(float(k1), float(k2), states))
    return out
