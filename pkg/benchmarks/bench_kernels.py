#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

The package's discrete fractional operators all reduce to one causal
convolution primitive; this script times both backends on it directly and
then on two representative workloads (a driven forward solve and an
L1-Caputo residual evaluation).

Run:
    python benchmarks/bench_kernels.py [--repeats N]

The env flag TFSLAB_NUMBA only selects the default backend inside the
package; here both implementations are imported explicitly.
"""

import argparse
import time

import numpy as np

from tfslab import _kernels
from tfslab.forward import SourceSpec, TimeGrid, caputo_l1, solve_forward
from tfslab.mlf import FractionalOrder
from tfslab.spectral import Grid1D, analytic_eigensystem


def timeit(func, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        func()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_primitive(repeats):
    rng = np.random.default_rng(1)
    print(f"{'shape':>14} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}")
    for shape in ((256,), (1024,), (4096,), (512, 32), (2048, 64)):
        sig = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        ker = rng.standard_normal(shape[0]) + 0j
        t_np = timeit(lambda: _kernels.causal_conv_numpy(sig, ker), repeats)
        if _kernels._HAVE_NUMBA:
            _kernels.causal_conv_numba(sig, ker)  # compile outside the clock
            t_nb = timeit(lambda: _kernels.causal_conv_numba(sig, ker), repeats)
            ratio = f"{t_np / t_nb:8.2f}x"
            nb_ms = f"{1e3 * t_nb:12.3f}"
        else:
            ratio, nb_ms = "     n/a", "         n/a"
        label = "x".join(str(s) for s in shape)
        print(f"{label:>14} {1e3 * t_np:12.3f} {nb_ms} {ratio}")


def bench_workloads(repeats):
    grid = Grid1D(1.0, 63)
    eig = analytic_eigensystem(1.0, 8, grid)
    order = FractionalOrder(0.5)
    tg = TimeGrid(1.0, 800)
    rho = np.linspace(0.2, 1.0, tg.n_t).astype(complex)
    src = SourceSpec.separable(rho, eig.phis[0])
    y0 = eig.phis[0].astype(complex)

    field = solve_forward(y0, src, order, eig, tg)
    stacked = np.vstack([y0[None, :], field.values])

    jobs = {
        "driven solve (8 modes, n_t=800)":
            lambda: solve_forward(y0, src, order, eig, tg),
        "L1 Caputo on the field (63 cols)":
            lambda: caputo_l1(stacked, 0.5, tg),
    }
    print(f"\n{'workload':<36} {'best (ms)':>10}   backend={_kernels.backend_name()}")
    for name, job in jobs.items():
        job()  # warm any caches
        print(f"{name:<36} {1e3 * timeit(job, repeats):10.2f}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    print(f"numba available: {_kernels._HAVE_NUMBA}  "
          f"(package backend: {_kernels.backend_name()})\n")
    bench_primitive(args.repeats)
    bench_workloads(args.repeats)


if __name__ == "__main__":
    main()
