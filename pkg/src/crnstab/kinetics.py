"""Mass-action vector fields, Jacobians, variable-rate fields and the Horn-Jackson Lyapunov function."""
from __future__ import annotations

import json
from dataclasses import dataclass
from numbers import Rational
from typing import Callable, Mapping, Sequence

import numpy as np

from .network import ReactionNetwork, require_positive


class RateError(ValueError):
    pass


@dataclass(frozen=True)
class RateAssignment:
    """Positive rate constants in edge order.

    Values may be ints/Fractions (kept exact for the rational code paths)
    or floats.
    """

    values: tuple

    def __post_init__(self):
        for v in self.values:
            if not (isinstance(v, Rational) or np.isfinite(v)) or v <= 0:
                raise RateError(f"rate constants must be strictly positive, got {v}")

    @classmethod
    def of(cls, net: ReactionNetwork, values: Sequence) -> RateAssignment:
        vals = tuple(values)
        if len(vals) != net.r:
            raise RateError(f"expected {net.r} rate constants, got {len(vals)}")
        return cls(tuple(v if isinstance(v, Rational) else float(v) for v in vals))

    @classmethod
    def from_mapping(cls, net: ReactionNetwork, mapping: Mapping[str, float]) -> RateAssignment:
        """Build from ``{"3X -> X+Y+Z": 1.5, ...}``; keys must cover the edge set exactly."""
        vals: list = [None] * net.r
        for key, v in mapping.items():
            try:
                k = net.edge_index(key)
            except KeyError as e:
                raise RateError(str(e)) from None
            if vals[k] is not None:
                raise RateError(f"reaction {key!r} given twice")
            vals[k] = v
        missing = [net.reaction_str(k) for k, v in enumerate(vals) if v is None]
        if missing:
            raise RateError(f"missing rate constants for: {', '.join(missing)}")
        return cls.of(net, vals)

    def to_mapping(self, net: ReactionNetwork) -> dict[str, float]:
        return {net.reaction_str(k): float(v) for k, v in enumerate(self.values)}

    @property
    def is_rational(self) -> bool:
        return all(isinstance(v, Rational) for v in self.values)

    def as_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.values], dtype=float)

    def __len__(self):
        return len(self.values)


def load_rates(net: ReactionNetwork, path) -> RateAssignment:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, list):
        return RateAssignment.of(net, data)
    return RateAssignment.from_mapping(net, data)


def _kappa_array(net: ReactionNetwork, kappa) -> np.ndarray:
    k = kappa.as_array() if isinstance(kappa, RateAssignment) else np.asarray(kappa, dtype=float)
    if k.shape != (net.r,):
        raise RateError(f"rate vector has {k.size} entries, network has {net.r} reactions")
    return k


def monomials(x: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """x**y for each row y of Y. Integer exponents use repeated squaring (via
    integer pow); 0**0 is 1."""
    if np.all(Y == np.round(Y)):
        return np.prod(np.power(x[None, :], Y.astype(np.int64)), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(Y == 0, 0.0, Y * np.log(x)[None, :])
    return np.exp(logs.sum(axis=1))


class MassActionField:
    """Precomputed mass-action right-hand side for a fixed network.

    ``__call__`` skips input validation; it is what integrators call in their
    inner loop.
    """

    def __init__(self, net: ReactionNetwork):
        self.net = net
        self.S = net.source_matrix
        self.R = net.reaction_vectors
        self._int = bool(np.all(self.S == np.round(self.S)))
        self._Si = self.S.astype(np.int64) if self._int else None

    def fluxes(self, kappa: np.ndarray, x: np.ndarray) -> np.ndarray:
        if self._int:
            mono = np.prod(np.power(x[None, :], self._Si), axis=1)
        else:
            mono = monomials(x, self.S)
        return kappa * mono

    def __call__(self, kappa: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self.fluxes(kappa, x) @ self.R

    def jacobian(self, kappa: np.ndarray, x: np.ndarray) -> np.ndarray:
        flux = self.fluxes(kappa, x)
        # d(kappa x^y)/dx_k = kappa y_k x^y / x_k
        dflux = flux[:, None] * self.S / x[None, :]
        return self.R.T @ dflux


def rhs(net: ReactionNetwork, kappa, x) -> np.ndarray:
    """Sum over edges of kappa_ij x^{y_i} (y_j - y_i)."""
    x = require_positive(x)
    if x.shape != (net.n,):
        raise ValueError("state dimension does not match the species count")
    return MassActionField(net)(_kappa_array(net, kappa), x)


def jacobian(net: ReactionNetwork, kappa, x) -> np.ndarray:
    x = require_positive(x)
    if x.shape != (net.n,):
        raise ValueError("state dimension does not match the species count")
    return MassActionField(net).jacobian(_kappa_array(net, kappa), x)


@dataclass(frozen=True)
class RateSchedule:
    """Time-dependent rates ``funcs[k](t)`` constrained to [eps_bound, 1/eps_bound].

    The callables must be safe to call concurrently.
    """

    funcs: tuple[Callable[[float], float], ...]
    eps_bound: float

    def __post_init__(self):
        if not 0 < self.eps_bound < 1:
            raise RateError("eps_bound must lie in (0, 1)")

    @classmethod
    def constant(cls, kappa: RateAssignment, eps_bound: float | None = None) -> RateSchedule:
        k = kappa.as_array()
        if eps_bound is None:
            eps_bound = min(float(k.min()), 1.0 / float(k.max()), 0.5)
        return cls(tuple((lambda t, v=float(v): v) for v in k), eps_bound)

    def __call__(self, t: float) -> np.ndarray:
        vals = np.array([f(t) for f in self.funcs], dtype=float)
        lo, hi = self.eps_bound, 1.0 / self.eps_bound
        bad = np.flatnonzero(~((vals >= lo) & (vals <= hi)))
        if bad.size:
            k = int(bad[0])
            raise RateError(f"schedule value {vals[k]} for reaction {k} at t={t} outside [{lo}, {hi}]")
        return vals


def rhs_variable(net: ReactionNetwork, schedule: RateSchedule, t: float, x) -> np.ndarray:
    if t < 0:
        raise ValueError("time must be nonnegative")
    if len(schedule.funcs) != net.r:
        raise RateError("schedule does not cover the edge set")
    return rhs(net, schedule(t), x)


@dataclass(frozen=True)
class LyapunovContext:
    x_star: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_star", require_positive(self.x_star, "reference state"))


def _ctx(ctx) -> LyapunovContext:
    return ctx if isinstance(ctx, LyapunovContext) else LyapunovContext(np.asarray(ctx, dtype=float))


def lyapunov_value(ctx, x) -> float:
    """sum_i x_i (ln x_i - ln x*_i - 1) + x*_i; zero exactly at x*."""
    ctx = _ctx(ctx)
    x = require_positive(x)
    xs = ctx.x_star
    return float(np.sum(x * (np.log(x) - np.log(xs) - 1.0) + xs))


def lyapunov_gradient(ctx, x) -> np.ndarray:
    ctx = _ctx(ctx)
    return np.log(require_positive(x)) - np.log(ctx.x_star)


def lyapunov_lie_derivative(ctx, net: ReactionNetwork, kappa, x) -> float:
    return float(lyapunov_gradient(ctx, x) @ rhs(net, kappa, x))
