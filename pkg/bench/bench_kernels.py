"""Compiled vs numpy kernels on the closed-loop Monte Carlo workload.

    python bench/bench_kernels.py [--runs 200] [--steps 1000] [--repeat 3]

Both implementations get identical inputs; the script also reports the max
absolute difference between their trajectories.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from rcbc import _pykernels
from rcbc.system import Controller, _kernel_args, nominal_benchmark
from rcbc.poly import PolyMatrix

try:
    from rcbc import _kernels
except ImportError:
    _kernels = None


def _controller(sys, rng):
    # small linear gain so trajectories stay finite for the whole run
    K = PolyMatrix.from_coeffs(sys.n, {(0,) * sys.n: -0.05 * rng.standard_normal((sys.l, sys.n))})
    return Controller(K)


def _timeit(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    print(f"{'workload':<28}{'numpy [s]':>12}{'compiled [s]':>14}{'speedup':>10}{'max |diff|':>12}")
    for name in ("spacecraft", "higher_degree", "chen"):
        sys = nominal_benchmark(name)
        ka = _kernel_args(sys, _controller(sys, rng))
        X0 = rng.uniform(-0.5, 0.5, (args.runs, sys.n))
        W = rng.uniform(-1e-3, 1e-3, (args.runs, args.steps, sys.n))
        if name == "chen":
            py = lambda: _pykernels.closed_loop_ct(*ka, X0, W, 1e-3, 10)  # noqa: E731
            cc = (lambda: _kernels.closed_loop_ct(*ka, X0, W, 1e-3, 10)) if _kernels else None
        else:
            py = lambda: _pykernels.closed_loop_dt(*ka, X0, W)  # noqa: E731
            cc = (lambda: _kernels.closed_loop_dt(*ka, X0, W)) if _kernels else None
        t_py, (tr_py, _) = _timeit(py, args.repeat)
        label = f"{name} ({args.runs}x{args.steps})"
        if cc is None:
            print(f"{label:<28}{t_py:>12.3f}{'n/a':>14}")
            continue
        t_cc, (tr_cc, _) = _timeit(cc, args.repeat)
        ok = np.isfinite(tr_py) & np.isfinite(tr_cc)
        diff = float(np.abs(tr_py[ok] - tr_cc[ok]).max()) if ok.any() else float("nan")
        print(f"{label:<28}{t_py:>12.3f}{t_cc:>14.3f}{t_py / t_cc:>10.1f}{diff:>12.2e}")

    X = rng.uniform(-2, 2, (200_000, 3))
    exps = nominal_benchmark("higher_degree").dict_M.exponent_array()
    t_py, a = _timeit(lambda: _pykernels.eval_monomials(exps, X), args.repeat)
    if _kernels:
        t_cc, b = _timeit(lambda: _kernels.eval_monomials(exps, X), args.repeat)
        print(f"{'eval_monomials (2e5 pts)':<28}{t_py:>12.3f}{t_cc:>14.3f}{t_py / t_cc:>10.1f}"
              f"{float(np.abs(a - b).max()):>12.2e}")


if __name__ == "__main__":
    main()
