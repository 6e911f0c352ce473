# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: lattice rollback, stopping-rule forward pass, LCP sweeps.

Every function here has a line-for-line twin in :mod:`amput._pykernels`.
No fast-math: results must be reproducible to the last bit run over run.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def rollback(Py_ssize_t n, double strike, const double[::1] drift,
             const double[::1] spread, double p_up, double disc,
             bint american, double tie_tol, layers=None):
    """Backward induction on the recombining lattice.

    Stock at (j, k) is ``drift[j] * spread[n + 2k - j]``.  Returns the root
    value and, per step, the largest exercising node index (-1 if none).
    """
    cdef double[::1] v = np.empty(n + 1, dtype=np.float64)
    cdef cnp.int64_t[::1] bidx = np.full(n + 1, -1, dtype=np.int64)
    cdef double q = 1.0 - p_up
    cdef double ex, cont, s
    cdef Py_ssize_t j, k
    cdef bint keep = layers is not None
    cdef double[:, ::1] lay
    if keep:
        lay = layers

    for k in range(n + 1):
        s = drift[n] * spread[2 * k]
        ex = strike - s
        if ex > 0.0:
            v[k] = ex
            bidx[n] = k
        else:
            v[k] = 0.0
    if keep:
        for k in range(n + 1):
            lay[n, k] = v[k]

    with nogil:
        for j in range(n - 1, -1, -1):
            for k in range(j + 1):
                cont = disc * (p_up * v[k + 1] + q * v[k])
                if american:
                    ex = strike - drift[j] * spread[n + 2 * k - j]
                    if ex > 0.0 and ex >= cont - tie_tol:
                        bidx[j] = k
                    if ex > cont:
                        cont = ex
                v[k] = cont
            if keep:
                for k in range(j + 1):
                    lay[j, k] = v[k]
    return v[0], np.asarray(bidx)


def stopping_forward(Py_ssize_t n, double strike, const double[::1] drift,
                     const double[::1] spread, const double[::1] disc_pow,
                     const double[::1] threshold, double sqrt_h, double h):
    """Exact expectation of a barrier stopping rule on the +-1 walk.

    At step ``j <= n-2`` every node with walk coordinate ``(2k-j)*sqrt_h``
    at or below ``threshold[j]`` stops; surviving mass stops at step ``n``.
    Returns ``(E[disc * payoff], E[(T - tau - h)**-0.5; tau <= T - 2h])``.
    """
    cdef double[::1] m = np.zeros(n + 2, dtype=np.float64)
    cdef double value = 0.0, tail = 0.0, pay, w, prev, cur, x
    cdef Py_ssize_t j, k
    m[0] = 1.0
    with nogil:
        for j in range(n + 1):
            if j <= n - 2 or j == n:
                if j == n:
                    w = 0.0
                else:
                    w = 1.0 / sqrt((n - j - 1) * h)
                for k in range(j + 1):
                    if m[k] == 0.0:
                        continue
                    x = (2 * k - j) * sqrt_h
                    if j == n or x <= threshold[j]:
                        pay = strike - drift[j] * spread[n + 2 * k - j]
                        if pay > 0.0:
                            value += m[k] * disc_pow[j] * pay
                        tail += m[k] * w
                        m[k] = 0.0
            if j < n:
                prev = 0.0
                for k in range(j + 2):
                    cur = m[k]
                    m[k] = 0.5 * (prev + cur)
                    prev = cur
    return value, tail


def lcp_brennan_schwartz(double lower, double diag, double upper,
                         const double[::1] rhs, const double[::1] obstacle,
                         double[::1] out):
    """Direct solve of the tridiagonal LCP with a lower exercise half-line.

    Rows ``lower*u[i-1] + diag*u[i] + upper*u[i+1] = rhs[i]`` for interior
    ``i``; ``out[0]`` and ``out[-1]`` hold fixed boundary values on entry.
    """
    cdef Py_ssize_t m = out.shape[0] - 1
    cdef double[::1] dd = np.empty(m + 1, dtype=np.float64)
    cdef double[::1] rr = np.empty(m + 1, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double val
    with nogil:
        dd[m - 1] = diag
        rr[m - 1] = rhs[m - 1] - upper * out[m]
        for i in range(m - 2, 0, -1):
            dd[i] = diag - upper * lower / dd[i + 1]
            rr[i] = rhs[i] - upper * rr[i + 1] / dd[i + 1]
        for i in range(1, m):
            val = (rr[i] - lower * out[i - 1]) / dd[i]
            if val < obstacle[i]:
                val = obstacle[i]
            out[i] = val


def lcp_psor(double lower, double diag, double upper,
             const double[::1] rhs, const double[::1] obstacle,
             double[::1] out, double omega, double tol, Py_ssize_t max_iter):
    """Projected SOR on the same system; ``out`` is the warm start.

    Returns the iteration count, or -1 when ``max_iter`` is exhausted.
    """
    cdef Py_ssize_t m = out.shape[0] - 1
    cdef Py_ssize_t i, it
    cdef double err, new, old, gs
    cdef Py_ssize_t done = -1
    with nogil:
        for it in range(1, max_iter + 1):
            err = 0.0
            for i in range(1, m):
                old = out[i]
                gs = (rhs[i] - lower * out[i - 1] - upper * out[i + 1]) / diag
                new = old + omega * (gs - old)
                if new < obstacle[i]:
                    new = obstacle[i]
                out[i] = new
                if fabs(new - old) > err:
                    err = fabs(new - old)
            if err <= tol:
                done = it
                break
    return done
