"""Binomial (random-walk) approximation of the American put.

Two schemes share one backward-induction kernel:

``PAPER``
    Additive +-1 walk with step ``sqrt(h)`` in walk units; the drift of the
    log price is carried by the payoff, so the value at step ``j`` and walk
    coordinate ``x`` is ``g(mu0*j*h + x)``.  Node ``k`` of step ``j`` sits at
    ``x = (2k - j) sqrt(h)``.
``RISK_NEUTRAL``
    Classical multiplicative tree ``u = exp(sigma sqrt(h))``, ``d = 1/u``
    with the risk-neutral up probability.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .model import MarketModel


class Scheme(enum.Enum):
    PAPER = "paper"
    RISK_NEUTRAL = "rn"


@dataclass(frozen=True)
class LatticeSpec:
    n: int
    scheme: Scheme = Scheme.PAPER
    # sup-norm of the walk increment; only the +-1 walk is implemented
    x_inf: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not isinstance(self.scheme, Scheme):
            object.__setattr__(self, "scheme", Scheme(self.scheme))

    def step(self, model: MarketModel) -> float:
        return model.T / self.n


@dataclass
class LatticeResult:
    price: float
    n: int
    h: float
    scheme: Scheme
    boundary_index: np.ndarray
    boundary_stock: np.ndarray
    layers: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class StoppingValue:
    value: float
    tail_expectation: float


def _tables(model: MarketModel, spec: LatticeSpec):
    n = spec.n
    h = spec.step(model)
    sqrt_h = math.sqrt(h)
    idx = np.arange(-n, n + 1, dtype=np.float64)
    spread = np.exp(model.sigma * sqrt_h * idx)
    steps = np.arange(n + 1, dtype=np.float64)
    if spec.scheme is Scheme.PAPER:
        drift = model.S0 * np.exp(model.mu * h * steps)
        p_up = 0.5
    else:
        drift = np.full(n + 1, model.S0)
        up = math.exp(model.sigma * sqrt_h)
        dn = math.exp(-model.sigma * sqrt_h)
        p_up = (math.exp((model.r - model.d) * h) - dn) / (up - dn)
        if not 0.0 < p_up < 1.0:
            raise ValueError(
                f"risk-neutral probability {p_up} outside (0, 1): h={h} too large for the drift")
    return drift, spread, p_up, math.exp(-model.r * h)


def node_stock(model: MarketModel, spec: LatticeSpec, j: int, k) -> np.ndarray:
    """Stock price at step ``j``, node(s) ``k``."""
    h = spec.step(model)
    x = (2 * np.asarray(k, dtype=np.float64) - j) * math.sqrt(h)
    drift = model.mu * j * h if spec.scheme is Scheme.PAPER else 0.0
    return model.S0 * np.exp(drift + model.sigma * x)


def price_american(model: MarketModel, spec: LatticeSpec, keep_layers: bool = False) -> LatticeResult:
    """American put by backward induction; also records the exercise boundary.

    With ``keep_layers`` the full value triangle is retained as an
    ``(n+1, n+1)`` array (row ``j`` holds nodes ``0..j``); memory is
    ``8 (n+1)^2`` bytes, so keep it for diagnostics at moderate ``n`` only.
    """
    drift, spread, p_up, disc = _tables(model, spec)
    layers = np.zeros((spec.n + 1, spec.n + 1)) if keep_layers else None
    tie_tol = 1e-12 * model.K
    price, bidx = kernels.rollback(spec.n, model.K, drift, spread, p_up, disc, True, tie_tol, layers)
    stock = np.full(spec.n + 1, np.nan)
    for j in np.flatnonzero(bidx >= 0):
        stock[j] = drift[j] * spread[spec.n + 2 * bidx[j] - j]
    return LatticeResult(price=price, n=spec.n, h=spec.step(model), scheme=spec.scheme,
                         boundary_index=bidx, boundary_stock=stock, layers=layers)


def price_european_on_lattice(model: MarketModel, spec: LatticeSpec) -> float:
    """Same recursion with exercise disabled."""
    drift, spread, p_up, disc = _tables(model, spec)
    price, _ = kernels.rollback(spec.n, model.K, drift, spread, p_up, disc, False, 0.0, None)
    return price


@dataclass
class BoundaryCurve:
    """Lattice exercise boundary as arrays over steps; NaN marks "none"."""

    step: np.ndarray
    t_years: np.ndarray
    x_walk: np.ndarray
    stock_price: np.ndarray


def extract_boundary(model: MarketModel, spec: LatticeSpec, result: LatticeResult) -> BoundaryCurve:
    n = result.n
    h = result.h
    steps = np.arange(n + 1)
    bidx = result.boundary_index
    x = np.where(bidx >= 0, (2.0 * bidx - steps) * math.sqrt(h), np.nan)
    return BoundaryCurve(step=steps, t_years=steps * h, x_walk=x,
                         stock_price=result.boundary_stock.copy())


def discrete_generator(v: np.ndarray, model: MarketModel, spec: LatticeSpec, j: int, k: int) -> float:
    """One-step drift ``E[v(j+1, x + sqrt(h) X)] - v(j, x)`` of a grid function.

    ``v[j, k]`` is the value at step ``j``, node ``k`` (walk coordinate
    ``(2k - j) sqrt(h)``), as in :attr:`LatticeResult.layers`.
    """
    if spec.scheme is not Scheme.PAPER:
        raise ValueError("the discrete generator is defined for the paper walk")
    if not 0 <= j < spec.n or not 0 <= k <= j:
        raise IndexError(f"node ({j}, {k}) outside the lattice interior for n={spec.n}")
    return 0.5 * (v[j + 1, k + 1] + v[j + 1, k]) - v[j, k]


def discrete_generator_field(v: np.ndarray, n: int) -> np.ndarray:
    """Vectorised :func:`discrete_generator` at every node of steps ``0..n-1``.

    Entries outside the triangle ``k <= j`` are NaN.
    """
    out = np.full((n, n + 1), np.nan)
    for j in range(n):
        out[j, : j + 1] = 0.5 * (v[j + 1, 1 : j + 2] + v[j + 1, : j + 1]) - v[j, : j + 1]
    return out


def discounted_layers(result: LatticeResult, model: MarketModel) -> np.ndarray:
    """``exp(-r j h) V_j`` as a triangle, i.e. the modified value ``u`` on the lattice."""
    if result.layers is None:
        raise ValueError("result was computed without keep_layers")
    j = np.arange(result.n + 1)[:, None]
    return np.exp(-model.r * j * result.h) * result.layers


def walk_boundary(model: MarketModel, btilde: Callable[[float], float]) -> Callable[[float], float]:
    """Map a log-price boundary (time to maturity) to walk coordinates (calendar time)."""

    def bhat(t: float) -> float:
        return (btilde(model.T - t) - model.mu * t - math.log(model.S0)) / model.sigma

    return bhat


def stopping_thresholds(model: MarketModel, spec: LatticeSpec,
                        btilde: Callable[[float], float]) -> np.ndarray:
    """Walk-coordinate trigger level at each step ``j <= n-2``.

    The walk stops at ``jh`` when its distance to ``(-inf, bhat(jh+h)]`` is
    at most ``sqrt(h)||X|| + |mu0| h``.
    """
    n = spec.n
    h = spec.step(model)
    bhat = walk_boundary(model, btilde)
    slack = math.sqrt(h) * spec.x_inf + abs(model.mu0) * h
    thr = np.full(n + 1, -np.inf)
    for j in range(n - 1):
        b = bhat((j + 1) * h)
        if np.isfinite(b):
            thr[j] = b + slack
    return thr


def stopping_rule_value(model: MarketModel, spec: LatticeSpec,
                        btilde: Callable[[float], float]) -> StoppingValue:
    """Exact value of the barrier stopping rule built from an external boundary.

    ``btilde(s)`` is the log-price exercise boundary at time to maturity
    ``s`` (``-inf`` or NaN where there is none).  The walk stops at the first
    grid time ``jh <= T - 2h`` at which it lies within
    ``sqrt(h) + |mu0| h`` of the exercise region at ``jh + h``; otherwise it
    stops at ``T``.  Computed by a forward pass over path masses, not by
    sampling.
    """
    if spec.scheme is not Scheme.PAPER:
        raise ValueError("the stopping rule is defined for the paper walk")
    if spec.n < 3:
        raise ValueError("stopping rule needs n >= 3")
    n = spec.n
    h = spec.step(model)
    drift, spread, _, _ = _tables(model, spec)
    disc_pow = np.exp(-model.r * h * np.arange(n + 1))
    thr = stopping_thresholds(model, spec, btilde)
    value, tail = kernels.stopping_forward(n, model.K, drift, spread, disc_pow, thr, math.sqrt(h), h)
    return StoppingValue(value=value, tail_expectation=tail)
