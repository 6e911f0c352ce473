"""Early exercise premium as a time integral over the exercise region.

With ``s`` the time to maturity of the boundary and ``tau = t - s``:

    U(t, x) - Ubar(t, x) = int_0^t [ r K e^{-r tau} N(z1)
                                     - d e^x e^{-d tau} N(z1 - sigma sqrt(tau)) ] ds,
    z1 = (btilde(s) - x - mu tau) / (sigma sqrt(tau)),

i.e. the Gaussian-kernel convolution of ``-(A - r) phi`` restricted to
``x <= btilde(s)``, done in closed form in space and by composite
Gauss-Legendre in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .model import MarketModel, european_put


@dataclass(frozen=True)
class PremiumInput:
    model: MarketModel
    boundary: Callable[[float], float]
    panels: int = 64
    order: int = 32

    def __post_init__(self):
        if self.panels * self.order < 8:
            raise ValueError("quadrature resolution below 8 nodes")


def generator_on_payoff(model: MarketModel, x: float) -> float:
    """``(A - r) phi(x)``: ``d e^x - r K`` below the strike, 0 above, left limit at ``ln K``."""
    if model.K == 0.0 or x > math.log(model.K):
        return 0.0
    return model.d * math.exp(x) - model.r * model.K


def gamma_of_t(model: MarketModel, boundary: Callable[[float], float], t: float) -> float:
    """``gamma(t) = -(A - r) phi(btilde(t)) = r K - d exp(btilde(t))``.

    A negative value means the boundary sits above ``rK/d`` and is returned
    as is so the caller can see the inconsistency.
    """
    if not t > 0:
        raise ValueError("t must be > 0")
    b = boundary(t)
    if not np.isfinite(b):
        return model.r * model.K
    return model.r * model.K - model.d * math.exp(b)


def _integrand(model: MarketModel, boundary, t: float, x: float, s: np.ndarray) -> np.ndarray:
    tau = t - s
    b = np.asarray(boundary(s), dtype=np.float64)
    vol = model.sigma * np.sqrt(tau)
    with np.errstate(invalid="ignore", divide="ignore"):
        z1 = (b - x - model.mu * tau) / vol
    z1 = np.where(np.isfinite(b), z1, -np.inf)
    return (model.r * model.K * np.exp(-model.r * tau) * ndtr(z1)
            - model.d * math.exp(x) * np.exp(-model.d * tau) * ndtr(z1 - vol))


def premium_quadrature(inp: PremiumInput, time_to_maturity: float, x: float) -> float:
    """Early exercise premium at time to maturity ``t`` and log price ``x``."""
    model = inp.model
    t = time_to_maturity
    if not t > 0:
        raise ValueError("time_to_maturity must be > 0")
    if model.K == 0.0:
        return 0.0
    nodes, weights = np.polynomial.legendre.leggauss(inp.order)
    edges = np.linspace(0.0, 1.0, inp.panels + 1)
    total = 0.0
    # s = t u^2 absorbs the square-root onset of the boundary at s = 0
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        u = a + half * (nodes + 1.0)
        f = _integrand(model, inp.boundary, t, x, t * u * u) * (2.0 * t * u)
        total += half * float(np.dot(weights, f))
    return total


@dataclass(frozen=True)
class PremiumCheck:
    premium: float
    european: float
    american: float


def american_from_premium(inp: PremiumInput) -> PremiumCheck:
    """European put plus premium at ``(T, ln S0)``."""
    model = inp.model
    prem = premium_quadrature(inp, model.T, math.log(model.S0))
    euro = european_put(model, model.T)
    return PremiumCheck(premium=prem, european=euro, american=euro + prem)
