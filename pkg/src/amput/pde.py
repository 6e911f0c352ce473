"""Finite-difference solver for the American put variational inequality.

Works in log price ``x`` and time to maturity ``s``:

    max(-dU/ds + (A - r) U, phi - U) = 0,   U(0, .) = phi,
    A = sigma^2/2 d^2/dx^2 + mu d/dx,       phi(x) = (K - e^x)^+.

Crank-Nicolson in time with a Rannacher start (the first two steps are
replaced by four backward-Euler half steps), central differences in space,
and a per-step linear complementarity problem solved either by the direct
Brennan-Schwartz sweep or by projected SOR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .lattice import LatticeSpec, price_american
from .model import MarketModel, european_put

RANNACHER_STEPS = 2  # full steps replaced by two backward-Euler half steps each
EXERCISE_TOL = 1e-10  # relative to K


class ConvergenceFailure(RuntimeError):
    """Projected SOR did not reach its tolerance; usually a grid misconfiguration."""


@dataclass
class PdeSolution:
    model: MarketModel
    x: np.ndarray
    s: np.ndarray
    final: np.ndarray
    btilde: np.ndarray
    exercise_index: np.ndarray
    surface: np.ndarray | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def ds(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def spot_index(self) -> int:
        return (len(self.x) - 1) // 2

    def price(self) -> float:
        """Value at maturity ``T`` and spot ``S0`` (a grid node by construction)."""
        return float(self.final[self.spot_index])

    def boundary(self) -> "OracleBoundary":
        return OracleBoundary(self.s, self.btilde)


class OracleBoundary:
    """Exercise boundary ``btilde(s)`` in log price, linear in ``s`` between layers.

    Below the first resolved layer the curve is held flat at its first
    finite value, and likewise above the last one.  Returns ``-inf`` when no
    layer has a boundary.
    """

    def __init__(self, s, btilde):
        s = np.asarray(s, dtype=np.float64)
        btilde = np.asarray(btilde, dtype=np.float64)
        ok = np.isfinite(btilde)
        self.s = s[ok]
        self.b = btilde[ok]

    @property
    def empty(self) -> bool:
        return self.s.size == 0

    def __call__(self, s):
        if self.empty:
            return -math.inf if np.ndim(s) == 0 else np.full(np.shape(s), -np.inf)
        out = np.interp(s, self.s, self.b)
        return float(out) if np.ndim(s) == 0 else out


def _grid(model: MarketModel, m: int, width: float) -> np.ndarray:
    center = math.log(model.S0)
    half = width * model.sigma * math.sqrt(model.T)
    if model.K > 0:
        half += abs(center - math.log(model.K))
    return center + half * np.linspace(-1.0, 1.0, m + 1)


def _operator(model: MarketModel, dx: float):
    diff = 0.5 * model.sigma ** 2 / dx ** 2
    conv = 0.5 * model.mu / dx
    return diff - conv, -2.0 * diff - model.r, diff + conv


def _apply(lo, di, up, u):
    out = np.zeros_like(u)
    out[1:-1] = lo * u[:-2] + di * u[1:-1] + up * u[2:]
    return out


def _locate(gap: np.ndarray, x: np.ndarray, phi: np.ndarray, tol: float):
    """Last node of the exercise run starting at the left edge, and refined boundary.

    Near the free boundary ``U - phi`` grows quadratically, so the root is
    found by linear extrapolation of ``sqrt(U - phi)`` through the first two
    continuation nodes, clamped to the cell left of the first one.
    """
    above = np.flatnonzero((gap > tol) | (phi <= 0.0))
    if above.size == 0 or above[0] == 0 or above[0] >= len(x) - 1:
        return -1, math.nan
    i1 = int(above[0])
    i0 = i1 - 1
    r1 = math.sqrt(max(gap[i1], 0.0))
    r2 = math.sqrt(max(gap[i1 + 1], 0.0))
    dx = x[1] - x[0]
    b = x[i1]
    if r2 > r1:
        b = x[i1] - r1 * dx / (r2 - r1)
    return i0, min(max(b, x[i0]), x[i1])


def _steps(n_t: int, ds: float):
    """Sub-steps as ``(dt, theta, stored_layer_or_None)``."""
    out = []
    for layer in range(1, n_t + 1):
        if layer <= RANNACHER_STEPS:
            out.append((0.5 * ds, 1.0, None))
            out.append((0.5 * ds, 1.0, layer))
        else:
            out.append((ds, 0.5, layer))
    return out


def solve_vi(model: MarketModel, m: int = 2000, n_t: int = 2000, width: float = 8.0,
             method: str = "bs", keep_surface: bool = True, omega: float = 1.5,
             max_iter: int = 100_000, _min_size: bool = True) -> PdeSolution:
    """Solve the variational inequality on ``[0, T]`` with ``m`` cells and ``n_t`` steps.

    The grid is centred on ``ln S0`` (a node) with half-width
    ``width * sigma * sqrt(T) + |ln(S0/K)|``.  At the left edge ``U = phi``
    (deep exercise region), at the right edge ``U`` equals the European put.

    ``method`` is ``"bs"`` (Brennan-Schwartz) or ``"psor"``.
    """
    if _min_size and (m < 200 or n_t < 200):
        raise ValueError("need m >= 200 and n_t >= 200")
    if width < 5:
        raise ValueError("width must be >= 5")
    if m % 2:
        raise ValueError("m must be even so that ln S0 is a grid node")
    if method not in ("bs", "psor"):
        raise ValueError(f"unknown method {method!r}")

    x = _grid(model, m, width)
    s = model.T * np.arange(n_t + 1) / n_t
    ds = model.T / n_t
    phi = np.maximum(model.K - np.exp(x), 0.0)
    tol = EXERCISE_TOL * model.K
    btilde = np.full(n_t + 1, np.nan)
    ex_idx = np.full(n_t + 1, -1, dtype=np.int64)
    surface = np.empty((n_t + 1, m + 1)) if keep_surface else None
    meta = {"m": m, "n_t": n_t, "width": width, "method": method, "omega": omega,
            "iterations": 0, "max_residual": 0.0, "half_layers": {}}

    if model.K == 0.0:
        if keep_surface:
            surface[:] = 0.0
        return PdeSolution(model, x, s, np.zeros(m + 1), btilde, ex_idx, surface, meta)

    lo, di, up = _operator(model, x[1] - x[0])
    u = phi.copy()
    if keep_surface:
        surface[0] = u
    s_now = 0.0
    half_count = 0
    for dt, theta, layer in _steps(n_t, ds):
        s_now = s_now + dt if layer is None else s[layer]
        rhs = u + (1.0 - theta) * dt * _apply(lo, di, up, u)
        a_lo, a_di, a_up = -theta * dt * lo, 1.0 - theta * dt * di, -theta * dt * up
        new = u.copy()
        new[0] = phi[0]
        new[-1] = european_put(model, s_now, spot=math.exp(x[-1]))
        if method == "bs":
            kernels.lcp_brennan_schwartz(a_lo, a_di, a_up, rhs, phi, new)
        else:
            it = kernels.lcp_psor(a_lo, a_di, a_up, rhs, phi, new, omega, tol, max_iter)
            if it < 0:
                raise ConvergenceFailure(f"PSOR did not converge in {max_iter} sweeps at s={s_now}")
            meta["iterations"] += it
        lhs = np.zeros_like(new)
        lhs[1:-1] = a_lo * new[:-2] + a_di * new[1:-1] + a_up * new[2:]
        res = np.minimum((lhs - rhs)[1:-1] / dt, (new - phi)[1:-1])
        meta["max_residual"] = max(meta["max_residual"], float(np.max(np.abs(res))))
        u = new
        if layer is None:
            meta["half_layers"][half_count] = u.copy()
            half_count += 1
            continue
        if keep_surface:
            surface[layer] = u
        ex_idx[layer], btilde[layer] = _locate(u - phi, x, phi, tol)
    meta["half_layers"] = meta["half_layers"] if keep_surface else {}
    return PdeSolution(model, x, s, u, btilde, ex_idx, surface, meta)


def complementarity_residual(sol: PdeSolution) -> float:
    """Recompute ``max |min(dU/ds - (A-r)U, U - phi)|`` over interior nodes of every step.

    Uses the stored surface and Rannacher half layers, independently of the
    residual tracked inside :func:`solve_vi`.
    """
    if sol.surface is None:
        raise ValueError("solution was computed without keep_surface")
    model = sol.model
    if model.K == 0.0:
        return 0.0
    lo, di, up = _operator(model, sol.dx)
    phi = np.maximum(model.K - np.exp(sol.x), 0.0)
    halves = sol.meta["half_layers"]
    chain = [sol.surface[0]]
    for layer in range(1, len(sol.s)):
        if layer <= RANNACHER_STEPS:
            chain += [(halves[layer - 1], 0.5 * sol.ds, 1.0), (sol.surface[layer], 0.5 * sol.ds, 1.0)]
        else:
            chain.append((sol.surface[layer], sol.ds, 0.5))
    worst = 0.0
    prev = chain[0]
    for new, dt, theta in chain[1:]:
        flux = (new - prev) / dt - theta * _apply(lo, di, up, new) - (1 - theta) * _apply(lo, di, up, prev)
        res = np.minimum(flux[1:-1], (new - phi)[1:-1])
        worst = max(worst, float(np.max(np.abs(res))))
        prev = new
    return worst


def _snap(f: float) -> float:
    # grid coordinates within rounding of a node land exactly on it
    r = round(f)
    return float(r) if abs(f - r) <= 1e-9 else f


def value_at(sol: PdeSolution, time_to_maturity: float, x: float) -> float:
    """Bilinear interpolation on the stored surface."""
    if sol.surface is None:
        raise ValueError("solution was computed without keep_surface")
    if not (sol.s[0] <= time_to_maturity <= sol.s[-1]) or not (sol.x[0] <= x <= sol.x[-1]):
        raise ValueError(f"point ({time_to_maturity}, {x}) outside the grid")
    ds, dx = sol.ds, sol.dx
    fi = _snap((time_to_maturity - sol.s[0]) / ds)
    fj = _snap((x - sol.x[0]) / dx)
    i = min(int(fi), len(sol.s) - 2)
    j = min(int(fj), len(sol.x) - 2)
    a = fi - i
    b = fj - j
    v = sol.surface
    return float((1 - a) * ((1 - b) * v[i, j] + b * v[i, j + 1])
                 + a * ((1 - b) * v[i + 1, j] + b * v[i + 1, j + 1]))


@dataclass(frozen=True)
class SmoothFit:
    max_abs: float
    max_rel: float
    layers: int


def smooth_fit_check(sol: PdeSolution, lo: float = 0.05, hi: float = 1.0) -> SmoothFit:
    """Continuation-side slope at the boundary against ``phi'(btilde) = -exp(btilde)``.

    The slope is the forward difference over the first two continuation
    nodes.  Only layers with time to maturity in ``[lo T, hi T]`` count;
    ``max_rel`` scales each deviation by ``exp(btilde)``.
    """
    T = sol.model.T
    worst_abs = worst_rel = 0.0
    count = 0
    for layer in range(len(sol.s)):
        if not (lo * T <= sol.s[layer] <= hi * T) or not np.isfinite(sol.btilde[layer]):
            continue
        i1 = sol.exercise_index[layer] + 1
        if sol.surface is None:
            raise ValueError("solution was computed without keep_surface")
        row = sol.surface[layer]
        slope = (row[i1 + 1] - row[i1]) / sol.dx
        eb = math.exp(sol.btilde[layer])
        dev = abs(slope + eb)
        worst_abs = max(worst_abs, dev)
        worst_rel = max(worst_rel, dev / eb)
        count += 1
    return SmoothFit(worst_abs, worst_rel, count)


@dataclass
class ReferencePrice:
    price: float
    lattice_estimate: float
    pde_estimate: float
    gap: float
    tol: float
    certified: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"price": self.price, "lattice_estimate": self.lattice_estimate,
                "pde_estimate": self.pde_estimate, "gap": self.gap, "tol": self.tol,
                "certified": self.certified, "detail": self.detail}


class CertificationError(RuntimeError):
    def __init__(self, ref: ReferencePrice):
        super().__init__(f"reference not certified: |lattice - pde| = {ref.gap:.3e} > tol {ref.tol:.3e}")
        self.reference = ref


def lattice_extrapolation(model: MarketModel, n_ref: int = 2 ** 15) -> tuple[float, dict]:
    """Average over ``(n, n+1)`` then Richardson between ``n_ref`` and ``2 n_ref``."""
    coarse = 0.5 * (price_american(model, LatticeSpec(n_ref)).price
                    + price_american(model, LatticeSpec(n_ref + 1)).price)
    fine = 0.5 * (price_american(model, LatticeSpec(2 * n_ref)).price
                  + price_american(model, LatticeSpec(2 * n_ref + 1)).price)
    return 2.0 * fine - coarse, {"n_ref": n_ref, "coarse": coarse, "fine": fine}


def pde_extrapolation(model: MarketModel, m: int = 4000, n_t: int = 4000,
                      order: float = 2.0) -> tuple[float, dict]:
    """Two solves, both grid spacings halved, combined by Richardson in the time step."""
    coarse = solve_vi(model, m, n_t, keep_surface=False).price()
    fine = solve_vi(model, 2 * m, 2 * n_t, keep_surface=False).price()
    w = 2.0 ** order
    return (w * fine - coarse) / (w - 1.0), {"m": m, "n_t": n_t, "coarse": coarse, "fine": fine}


def reference_price(model: MarketModel, tol: float | None = None, n_ref: int = 2 ** 15,
                    m: int = 4000, n_t: int = 4000) -> ReferencePrice:
    """Certified ``P0``: the PDE extrapolate, checked against the lattice extrapolate.

    ``certified`` is False (never silently patched) when the two disagree by
    more than ``tol`` (default ``2e-6 K``).
    """
    if tol is None:
        tol = 2e-6 * model.K
    if tol < 1e-6 * model.K:
        raise ValueError("tol must be >= 1e-6 K")
    if model.K == 0.0:
        return ReferencePrice(0.0, 0.0, 0.0, 0.0, tol, True)
    a, da = lattice_extrapolation(model, n_ref)
    b, db = pde_extrapolation(model, m, n_t)
    gap = abs(a - b)
    return ReferencePrice(price=b, lattice_estimate=a, pde_estimate=b, gap=gap, tol=tol,
                          certified=gap <= tol, detail={"lattice": da, "pde": db})
