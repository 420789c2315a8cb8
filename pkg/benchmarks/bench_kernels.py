"""Time the numba loop kernels against their numpy counterparts.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is called once untimed (numba compilation / cache load), then the
best of ``--repeat`` timings is reported for both implementations on inputs
sized like a real run (160 accounts, 21 issues, a few thousand videos).
"""
import argparse
import timeit

import numpy as np

from recaudit import kernels
from recaudit._accel import NUMBA_ENABLED


def _inputs(rng):
    x = (rng.random((160, 3000)) < 0.05).astype(np.int8)
    w = kernels.coexposure_counts_numpy(x).astype(np.float64)
    a = w > 8
    adj = w * a
    order = rng.permutation(160).astype(np.int64)
    comm = rng.integers(0, 12, 160).astype(np.int64)
    state = rng.random((160, 21))
    state /= state.sum(axis=1, keepdims=True)
    gender = np.repeat([0, 1], 80).astype(np.int64)
    p = rng.random((160, 159))
    p /= p.sum(axis=1, keepdims=True)
    u = rng.random((160, 10))
    return {
        "coexposure_counts": ((x,), {}),
        "barrat_numerators": ((adj, a), {}),
        "louvain_local_move": ((adj, order, 1.0), {"fresh": True}),
        "aggregate_adjacency": ((adj, comm, 12), {}),
        "sim_step": ((state, gender, 0.1, 0.1, 0.1), {}),
        "sample_categorical": ((p, u), {}),
    }


def _timed(fn, args, fresh, repeat):
    def call():
        if fresh:  # the local-move kernel mutates its membership argument
            fn(*args, np.arange(args[0].shape[0], dtype=np.int64))
        else:
            fn(*args)

    call()
    return min(timeit.repeat(call, number=1, repeat=repeat))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not NUMBA_ENABLED:
        print("numba is disabled or missing; the *_loop kernels run as plain Python")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'numba (ms)':>12}{'numpy (ms)':>12}{'speedup':>10}  active")
    for name, (fargs, opts) in _inputs(rng).items():
        fresh = opts.get("fresh", False)
        t_loop = _timed(getattr(kernels, f"{name}_loop"), fargs, fresh, args.repeat)
        t_np = _timed(getattr(kernels, f"{name}_numpy"), fargs, fresh, args.repeat)
        active = "numba" if getattr(kernels, name) is getattr(kernels, f"{name}_loop") else "numpy"
        print(f"{name:<22}{1e3 * t_loop:>12.3f}{1e3 * t_np:>12.3f}{t_np / t_loop:>9.2f}x  {active}")


if __name__ == "__main__":
    main()
