"""Pure-Python/numpy fallback for :mod:`amput._ckernels`.

Same signatures and the same arithmetic order, so both backends agree to
rounding.  The lattice loops are vectorised per layer; the LCP sweeps are
inherently sequential and run as plain Python loops (slow, but only used
when the extension is unavailable).
"""

from __future__ import annotations

import math

import numpy as np


def rollback(n, strike, drift, spread, p_up, disc, american, tie_tol, layers=None):
    q = 1.0 - p_up
    bidx = np.full(n + 1, -1, dtype=np.int64)
    ex = strike - drift[n] * spread[0 : 2 * n + 1 : 2]
    v = np.where(ex > 0.0, ex, 0.0)
    pos = np.flatnonzero(ex > 0.0)
    if pos.size:
        bidx[n] = pos[-1]
    if layers is not None:
        layers[n, : n + 1] = v
    for j in range(n - 1, -1, -1):
        cont = disc * (p_up * v[1 : j + 2] + q * v[: j + 1])
        if american:
            ex = strike - drift[j] * spread[n - j : n + j + 1 : 2]
            hit = np.flatnonzero((ex > 0.0) & (ex >= cont - tie_tol))
            if hit.size:
                bidx[j] = hit[-1]
            cont = np.where(ex > cont, ex, cont)
        v = cont
        if layers is not None:
            layers[j, : j + 1] = v
    return float(v[0]), bidx


def stopping_forward(n, strike, drift, spread, disc_pow, threshold, sqrt_h, h):
    m = np.zeros(n + 2)
    m[0] = 1.0
    value = 0.0
    tail = 0.0
    for j in range(n + 1):
        if j <= n - 2 or j == n:
            w = 0.0 if j == n else 1.0 / math.sqrt((n - j - 1) * h)
            k = np.arange(j + 1)
            x = (2 * k - j) * sqrt_h
            stop = m[: j + 1] != 0.0
            if j < n:
                stop &= x <= threshold[j]
            pay = strike - drift[j] * spread[n - j : n + j + 1 : 2]
            # sequential accumulation keeps the summation order of the C loop
            for kk in np.flatnonzero(stop):
                if pay[kk] > 0.0:
                    value += m[kk] * disc_pow[j] * pay[kk]
                tail += m[kk] * w
            m[: j + 1][stop] = 0.0
        if j < n:
            prev = np.concatenate(([0.0], m[: j + 1]))
            m[: j + 2] = 0.5 * (prev + m[: j + 2])
    return value, tail


def lcp_brennan_schwartz(lower, diag, upper, rhs, obstacle, out):
    m = out.shape[0] - 1
    dd = np.empty(m + 1)
    rr = np.empty(m + 1)
    dd[m - 1] = diag
    rr[m - 1] = rhs[m - 1] - upper * out[m]
    for i in range(m - 2, 0, -1):
        dd[i] = diag - upper * lower / dd[i + 1]
        rr[i] = rhs[i] - upper * rr[i + 1] / dd[i + 1]
    for i in range(1, m):
        val = (rr[i] - lower * out[i - 1]) / dd[i]
        out[i] = val if val >= obstacle[i] else obstacle[i]


def lcp_psor(lower, diag, upper, rhs, obstacle, out, omega, tol, max_iter):
    m = out.shape[0] - 1
    for it in range(1, max_iter + 1):
        err = 0.0
        for i in range(1, m):
            old = out[i]
            gs = (rhs[i] - lower * out[i - 1] - upper * out[i + 1]) / diag
            new = old + omega * (gs - old)
            if new < obstacle[i]:
                new = obstacle[i]
            out[i] = new
            if abs(new - old) > err:
                err = abs(new - old)
        if err <= tol:
            return it
    return -1
