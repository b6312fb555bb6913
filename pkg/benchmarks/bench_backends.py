"""Benchmark the compiled inner kernel against the pure-numpy fallback.

The fused masked objective/gradient is the solver's hot loop: a full table
run evaluates it millions of times. Run as:

    python benchmarks/bench_backends.py
"""

from __future__ import annotations

import time

import numpy as np

from fragcov import SolveConfig, band_mask, solve_fixed_rank
from fragcov import _fastpath_py

try:
    from fragcov import _fastpath
except ImportError:
    _fastpath = None


def _triple(K, r, seed=0):
    rng = np.random.default_rng(seed)
    gamma = np.ascontiguousarray(rng.standard_normal((K, r)))
    target = rng.standard_normal((K, K))
    target = np.ascontiguousarray(target + target.T)
    mask = np.ascontiguousarray(band_mask(K, 0.5).include.astype(np.uint8))
    return gamma, target, mask


def _time_call(fn, args, repeats):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def run_benchmark(sizes=((50, 3), (100, 5), (200, 8)), repeats=2000, solve_reps=20):
    rows = []
    for K, r in sizes:
        args = _triple(K, r)
        t_py = _time_call(_fastpath_py.masked_objective_grad, args, repeats)
        row = {"K": K, "r": r, "python_us": t_py * 1e6}
        if _fastpath is not None:
            t_c = _time_call(_fastpath.masked_objective_grad, args, repeats)
            row["compiled_us"] = t_c * 1e6
            row["speedup"] = t_py / t_c
        rows.append(row)

    if solve_reps:
        # end-to-end: one fixed-rank solve per backend on a banded target
        from fragcov import _backend

        _, target, _ = _triple(50, 3, seed=1)
        mask = band_mask(50, 0.4)
        banded = (target @ target.T) * mask.include
        impls = [("python", _fastpath_py)]
        if _fastpath is not None:
            impls.insert(0, ("compiled", _fastpath))
        original = _backend._impl
        try:
            for label, impl in impls:
                _backend._impl = impl
                t0 = time.perf_counter()
                for seed in range(solve_reps):
                    solve_fixed_rank(banded, mask, 3, SolveConfig(max_iter=200), rng=seed)
                rows.append({"solve_backend": label, "per_solve_ms": (time.perf_counter() - t0) / solve_reps * 1e3})
        finally:
            _backend._impl = original
    return rows


def main():
    print(f"compiled extension available: {_fastpath is not None}")
    for row in run_benchmark():
        if "K" in row:
            line = f"K={row['K']:>4} r={row['r']}: python {row['python_us']:8.2f} us/eval"
            if "compiled_us" in row:
                line += f"   compiled {row['compiled_us']:8.2f} us/eval   speedup x{row['speedup']:.1f}"
            print(line)
        else:
            print(f"solve ({row['solve_backend']} dispatch): {row['per_solve_ms']:.2f} ms/solve")


if __name__ == "__main__":
    main()
