"""Adaptive Dormand-Prince 5(4) integration of mass-action systems.

Steps that would leave the open positive orthant are rejected and halved
rather than projected back, so conservation laws are never corrupted by the
guard. Convergence is judged on the trailing window of the trajectory.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .kinetics import MassActionField, RateSchedule, _kappa_array, lyapunov_value
from .network import ReactionNetwork, require_positive

# Dormand & Prince (1980) coefficients
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
# PI controller exponents (Hairer-Wanner II.4, beta = 0.04 for DOPRI5)
ALPHA = 0.7 / 5
BETA = 0.4 / 5


class IntegrationError(RuntimeError):
    """Raised when the step size underflows; ``trajectory`` holds the partial result."""

    def __init__(self, message: str, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class IntegratorConfig:
    t_end: float = 100.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = np.inf
    first_step: float | None = None
    convergence_window: float | None = None  # default: 5% of t_end
    convergence_eps: float = 1e-9
    convergence_rhs_tol: float = 1e-6
    detect_convergence: bool = True
    min_step: float = 1e-14
    max_steps: int = 1_000_000
    drift_bound: float = 1e-6
    fixed_step: float | None = None
    checkpoints: tuple[float, ...] = ()

    def __post_init__(self):
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.fixed_step is not None and self.fixed_step <= 0:
            raise ValueError("fixed_step must be positive")

    @property
    def window(self) -> float:
        return self.convergence_window if self.convergence_window is not None else 0.05 * self.t_end


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    conservation_drift: float
    converged_to: np.ndarray | None = None
    step_count: int = 0
    rejected_steps: int = 0
    positivity_rejections: int = 0
    species: tuple[str, ...] = ()
    config: IntegratorConfig | None = field(default=None, repr=False)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation between accepted steps (exact at checkpoints)."""
        return np.array([np.interp(t, self.times, self.states[:, k]) for k in range(self.states.shape[1])])

    def sample(self, times: Sequence[float]) -> np.ndarray:
        idx = np.searchsorted(self.times, times)
        ok = (idx < len(self.times)) & (self.times[np.minimum(idx, len(self.times) - 1)] == np.asarray(times))
        if np.all(ok):
            return self.states[idx]
        return np.array([self.at(t) for t in times])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *self.species])
        for t, x in zip(self.times, self.states):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in x)])
        return buf.getvalue()

    def metadata(self) -> dict:
        cfg = asdict(self.config) if self.config else {}
        cfg = {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.items()}
        if cfg.get("max_step") == np.inf:
            cfg["max_step"] = None
        return {
            "species": list(self.species),
            "n_samples": int(len(self.times)),
            "t_final": float(self.times[-1]),
            "final_state": [float(v) for v in self.final],
            "conservation_drift": float(self.conservation_drift),
            "converged": self.converged_to is not None,
            "converged_to": None if self.converged_to is None else [float(v) for v in self.converged_to],
            "step_count": int(self.step_count),
            "rejected_steps": int(self.rejected_steps),
            "config": cfg,
        }

    def to_json(self) -> str:
        d = self.metadata()
        d["times"] = [float(t) for t in self.times]
        d["states"] = [[float(v) for v in x] for x in self.states]
        return json.dumps(d, indent=2)


def _error_norm(err, y, y_new, cfg: IntegratorConfig) -> float:
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(f, t0, y0, f0, cfg: IntegratorConfig) -> float:
    scale = cfg.abs_tol + cfg.rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    if np.any(y1 <= 0):
        return h0 * 1e-3
    d2 = np.sqrt(np.mean(((f(t0 + h0, y1) - f0) / scale) ** 2)) / h0
    h1 = max(1e-6, h0 * 1e-3) if max(d1, d2) <= 1e-15 else (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def solve(f: Callable[[float, np.ndarray], np.ndarray], y0, cfg: IntegratorConfig,
          complement: np.ndarray | None = None, species: Sequence[str] = ()) -> Trajectory:
    """Integrate ``y' = f(t, y)`` on [0, t_end] keeping y strictly positive.

    ``complement`` (rows spanning S-perp) enables conservation-drift
    monitoring. Convergence detection runs on the finished trajectory.
    """
    y = require_positive(y0, "initial state").copy()
    t, t_end = 0.0, float(cfg.t_end)
    times, states = [t], [y.copy()]
    drift = 0.0
    c0 = complement @ y if complement is not None else None
    n_acc = n_rej = n_pos = 0
    stops = sorted({float(c) for c in cfg.checkpoints if 0 < c < t_end} | {t_end})
    stop_i = 0

    if t_end == 0:
        return Trajectory(np.array(times), np.array(states), 0.0, None, 0, 0, 0, tuple(species), cfg)

    k1 = f(t, y)
    if cfg.fixed_step is not None:
        h = cfg.fixed_step
    else:
        h = cfg.first_step or _initial_step(f, t, y, k1, cfg)
    h = min(h, cfg.max_step)
    err_prev = 1e-4

    def partial():
        return Trajectory(np.array(times), np.array(states), drift, None, n_acc, n_rej, n_pos, tuple(species), cfg)

    while t < t_end:
        if n_acc + n_rej > cfg.max_steps:
            raise IntegrationError(f"step budget exhausted at t={t}", partial())
        target = stops[stop_i]
        gap = target - t
        # stretch onto the stop rather than leave a round-off sized remainder
        last = h >= gap * (1.0 - 1e-8)
        h_try = gap if last else h
        if h_try < cfg.min_step * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t}", partial())

        ks = [k1]
        ok = True
        for s in range(1, 7):
            ys = y + h_try * sum(a * k for a, k in zip(_A[s], ks) if a != 0.0)
            if np.any(ys <= 0) or not np.all(np.isfinite(ys)):
                ok = False
                break
            if s < 6:
                ks.append(f(t + _C[s] * h_try, ys))
            else:
                y_new = ys  # FSAL: stage 7 node is the 5th-order solution
                ks.append(f(t + h_try, y_new))
        if not ok:
            n_rej += 1
            n_pos += 1
            h = h_try * 0.5
            continue

        if cfg.fixed_step is None:
            err = h_try * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
            en = _error_norm(err, y, y_new, cfg)
            if en > 1.0:
                n_rej += 1
                h = h_try * max(MIN_FACTOR, SAFETY * en ** (-1 / 5))
                continue
            en = max(en, 1e-10)
            factor = SAFETY * en ** (-ALPHA) * err_prev ** BETA
            factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            err_prev = en

        t = target if last else t + h_try
        if last:
            stop_i += 1
        y = y_new
        k1 = ks[6]
        n_acc += 1
        times.append(t)
        states.append(y.copy())
        if c0 is not None:
            drift = max(drift, float(np.linalg.norm(complement @ y - c0)))
        if cfg.fixed_step is None:
            # keep the controller's proposal even after a checkpoint clip shortened this step
            h = min(cfg.max_step, max(h, h_try) * factor if last else h_try * factor)
        else:
            h = cfg.fixed_step

    return Trajectory(np.array(times), np.array(states), drift, None, n_acc, n_rej, n_pos, tuple(species), cfg)


def _detect_convergence(traj: Trajectory, field_at: Callable[[np.ndarray], np.ndarray], cfg: IntegratorConfig):
    if len(traj.times) < 2 or cfg.t_end == 0:
        return None
    t_last = traj.times[-1]
    mask = traj.times >= t_last - cfg.window
    tail = traj.states[mask]
    x_end = traj.final
    var = float(np.max(np.abs(tail - x_end) / np.abs(x_end)))
    if var > cfg.convergence_eps:
        return None
    scale = max(1.0, float(np.max(np.abs(x_end))))
    if float(np.max(np.abs(field_at(x_end)))) > cfg.convergence_rhs_tol * scale:
        return None
    return x_end.copy()


def integrate(net: ReactionNetwork, kappa, x0, cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Mass-action trajectory from ``x0`` on [0, cfg.t_end]."""
    x0 = require_positive(x0, "initial state")
    if x0.shape != (net.n,):
        raise ValueError("state dimension does not match the species count")
    fld = MassActionField(net)
    k = _kappa_array(net, kappa)
    traj = solve(lambda t, x: fld(k, x), x0, cfg, net.analysis.complement_basis, net.species)
    if cfg.detect_convergence:
        traj.converged_to = _detect_convergence(traj, lambda x: fld(k, x), cfg)
    return traj


def integrate_variable(net: ReactionNetwork, schedule: RateSchedule, x0,
                       cfg: IntegratorConfig = IntegratorConfig(detect_convergence=False)) -> Trajectory:
    """Variable-rate trajectory; every stage evaluation checks the schedule bounds."""
    x0 = require_positive(x0, "initial state")
    if len(schedule.funcs) != net.r:
        raise ValueError("schedule does not cover the edge set")
    fld = MassActionField(net)
    traj = solve(lambda t, x: fld(schedule(t), x), x0, cfg, net.analysis.complement_basis, net.species)
    if cfg.detect_convergence:
        t_last = float(traj.times[-1])
        traj.converged_to = _detect_convergence(traj, lambda x: fld(schedule(t_last), x), cfg)
    return traj


def lyapunov_descent_check(net: ReactionNetwork, kappa, traj: Trajectory, x_star) -> tuple[bool, float]:
    """Evaluate V(x; x*) along the samples; monotone iff every increase is
    within 1e-9 * V + 1e-12. Returns (monotone, largest increase seen)."""
    vals = np.array([lyapunov_value(x_star, x) for x in traj.states])
    inc = np.diff(vals)
    if inc.size == 0:
        return True, 0.0
    slack = 1e-9 * vals[:-1] + 1e-12
    return bool(np.all(inc <= slack)), float(max(0.0, inc.max()))
