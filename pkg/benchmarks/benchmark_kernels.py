"""Time the compiled grid kernel against its pure-numpy twin.

Builds a synthetic fitting fold, evaluates the full candidate weight grid
with both backends, checks the counts agree bit for bit, and reports the
per-backend wall time and the speedup. Run from the repository root:

    python3 benchmarks/benchmark_kernels.py
    python3 benchmarks/benchmark_kernels.py --samples 20000 --resolution 201
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fairvote._kernels import _grid_py
from fairvote.fairfit import GridSpec, grid_matrix

try:
    from fairvote._kernels import _grid_c
except ImportError:
    _grid_c = None


def synthetic_fold(n_samples, n_groups, seed):
    """One member's fold: task scores, group scores, labels, groups."""
    rng = np.random.default_rng(seed)
    task = rng.random(n_samples)
    gscores = rng.dirichlet(np.ones(n_groups), size=n_samples)
    labels = (rng.random(n_samples) < 0.5).astype(np.int8)
    groups = rng.integers(0, n_groups, size=n_samples, dtype=np.int32)
    return task, gscores, labels, groups


def time_backend(fn, args, repeats):
    """Best-of-N wall time for one backend, plus its outputs."""
    out = fn(*args)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Benchmark the grid evaluation kernel backends."
    )
    parser.add_argument("--samples", type=int, default=5000,
                        help="fold size (default 5000)")
    parser.add_argument("--groups", type=int, default=2,
                        help="number of groups (default 2)")
    parser.add_argument("--resolution", type=int, default=101,
                        help="odd grid resolution per group (default 101)")
    parser.add_argument("--w-max", type=float, default=1.0,
                        help="weight range half-width (default 1.0)")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats, best is reported (default 5)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    task, gscores, labels, groups = synthetic_fold(
        args.samples, args.groups, args.seed
    )
    weights = grid_matrix(
        GridSpec(resolution=args.resolution, w_max=args.w_max), args.groups
    )
    call_args = (task, gscores, labels, groups, weights)
    print(
        f"fold: {args.samples} samples, {args.groups} groups; "
        f"grid: {weights.shape[0]} candidates "
        f"({args.samples * weights.shape[0]:.2e} margin evaluations)"
    )

    py_time, (py_correct, py_tp) = time_backend(
        _grid_py.grid_counts, call_args, args.repeats
    )
    print(f"python   backend: {py_time * 1000:9.2f} ms")

    if _grid_c is None:
        print("compiled backend: unavailable (extension not built)")
        return

    c_time, (c_correct, c_tp) = time_backend(
        _grid_c.grid_counts, call_args, args.repeats
    )
    print(f"compiled backend: {c_time * 1000:9.2f} ms")
    print(f"speedup: {py_time / c_time:.2f}x")

    if not (np.array_equal(py_correct, c_correct)
            and np.array_equal(py_tp, c_tp)):
        raise AssertionError("backends disagree; parity contract broken")
    print("parity: counts identical across backends")


if __name__ == "__main__":
    main()
