"""Compiled vs pure-Python kernels on the lattice rollback and one LCP time step.

    python benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time

import numpy as np

from amput import MarketModel, kernels
from amput.lattice import LatticeSpec, _tables


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def rollback_case(mod, model, n):
    drift, spread, p, disc = _tables(model, LatticeSpec(n))
    return lambda: mod.rollback(n, model.K, drift, spread, p, disc, True, 1e-12 * model.K, None)


def lcp_case(mod, size, method):
    x = np.linspace(-2.0, 2.0, size + 1)
    dx = x[1] - x[0]
    dt = 1e-3
    diff, conv = 0.5 * 0.04 / dx ** 2, 0.5 * 0.03 / dx
    lo, up = -0.5 * dt * (diff - conv), -0.5 * dt * (diff + conv)
    di = 1.0 + 0.5 * dt * (2 * diff + 0.05)
    phi = np.maximum(1.0 - np.exp(x), 0.0)

    def run():
        out = phi.copy()
        out[-1] = 0.0
        if method == "bs":
            mod.lcp_brennan_schwartz(lo, di, up, phi, phi, out)
        else:
            mod.lcp_psor(lo, di, up, phi, phi, out, 1.5, 1e-10, 100000)

    return run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    try:
        cy = kernels.backend("cython")
    except ImportError:
        raise SystemExit("compiled extension not built; run pip install -e . --no-build-isolation")
    py = kernels.backend("python")
    model = MarketModel(0.05, 0.03, 0.2, 100.0, 100.0, 1.0)

    print(f"{'kernel':<28}{'cython [s]':>12}{'python [s]':>12}{'speedup':>10}")
    cases = [(f"rollback n={n}", rollback_case(cy, model, n), rollback_case(py, model, n))
             for n in (1024, 4096, 16384)]
    cases += [(f"brennan-schwartz m={m}", lcp_case(cy, m, "bs"), lcp_case(py, m, "bs")) for m in (2000, 8000)]
    cases += [("psor m=400", lcp_case(cy, 400, "psor"), lcp_case(py, 400, "psor"))]
    for name, fc, fp in cases:
        tc, tp = best_of(fc, args.repeat), best_of(fp, args.repeat)
        print(f"{name:<28}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}")


if __name__ == "__main__":
    main()
