"""Market and contract parameters, payoffs, and the closed-form European put."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class MarketModel:
    """Black-Scholes market with continuous dividend yield and a put contract.

    Units: rates per year, ``sigma`` per square-root year, ``T`` in years.
    """

    r: float
    d: float
    sigma: float
    S0: float
    K: float
    T: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"r must be > 0, got {self.r}")
        if not self.d >= 0:
            raise ValueError(f"d must be >= 0, got {self.d}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.S0 > 0:
            raise ValueError(f"S0 must be > 0, got {self.S0}")
        if not self.K >= 0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        if not self.T > 0:
            raise ValueError(f"T must be > 0, got {self.T}")

    @property
    def mu(self) -> float:
        """Drift of the log price, ``r - d - sigma**2/2``."""
        return self.r - self.d - 0.5 * self.sigma * self.sigma

    @property
    def mu0(self) -> float:
        """Drift in walk units, ``mu / sigma``."""
        return self.mu / self.sigma

    @property
    def dividend_dominates(self) -> bool:
        return self.d > self.r

    def to_dict(self) -> dict:
        return {"r": self.r, "d": self.d, "sigma": self.sigma,
                "s0": self.S0, "k": self.K, "t": self.T}

    @classmethod
    def from_dict(cls, data: dict) -> "MarketModel":
        missing = {"r", "d", "sigma", "s0", "k", "t"} - set(data)
        if missing:
            raise ValueError(f"model JSON missing keys: {sorted(missing)}")
        return cls(r=float(data["r"]), d=float(data["d"]), sigma=float(data["sigma"]),
                   S0=float(data["s0"]), K=float(data["k"]), T=float(data["t"]))

    @classmethod
    def load(cls, path) -> "MarketModel":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def normal_cdf(z: float) -> float:
    """Standard normal distribution function via ``erfc`` (no cancellation in either tail)."""
    return 0.5 * math.erfc(-z / _SQRT2)


def normal_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def payoff_g(model: MarketModel, x: float) -> float:
    """Put payoff in walk coordinates: ``(K - S0 exp(sigma x))^+``."""
    return max(model.K - model.S0 * math.exp(model.sigma * x), 0.0)


def payoff_phi(model: MarketModel, y: float) -> float:
    """Put payoff in log-price coordinates: ``(K - exp(y))^+``."""
    return max(model.K - math.exp(y), 0.0)


def european_put(model: MarketModel, remaining: float, spot: float | None = None) -> float:
    """Black-Scholes European put with dividend yield.

    ``remaining`` is the time to maturity in years; ``spot`` defaults to
    ``model.S0``.
    """
    if not remaining > 0:
        raise ValueError(f"remaining must be > 0, got {remaining}")
    s = model.S0 if spot is None else spot
    k = model.K
    if k == 0.0 or s <= 0.0:
        return k * math.exp(-model.r * remaining) if s <= 0.0 else 0.0
    vol = model.sigma * math.sqrt(remaining)
    d1 = (math.log(s / k) + (model.r - model.d + 0.5 * model.sigma ** 2) * remaining) / vol
    d2 = d1 - vol
    value = (k * math.exp(-model.r * remaining) * normal_cdf(-d2)
             - s * math.exp(-model.d * remaining) * normal_cdf(-d1))
    return max(value, 0.0)
