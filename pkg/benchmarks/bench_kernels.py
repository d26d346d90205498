"""Time the numba and numpy paths of each inner-loop kernel.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first numba call of each kernel is made before timing so compilation is
excluded. Results are the best of ``--repeat`` runs.
"""
import argparse
import timeit

import numpy as np

from dyncomp import _kernels


def cases(rng):
    lags = rng.standard_normal((10, 30, 30))
    G = rng.standard_normal((5 * 30, 5 * 30))
    return {
        "lorenz_rk4": (np.array([1.0, 1.0, 1.0]), 10.0, 28.0, 8.0 / 3.0, 0.005, 10_000, 1, 1000),
        "ar1": (rng.standard_normal(1_000_000), 0.99),
        "toeplitz": (lags, 5),
        "block_diag_sums": (G, 5, 30),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"numba available: {_kernels.HAS_NUMBA}")
    print(f"{'kernel':<18}{'numba (ms)':>12}{'numpy (ms)':>12}{'speedup':>10}")
    for name, call_args in cases(rng).items():
        impl = _kernels.IMPLEMENTATIONS[name]
        impl["numba"](*call_args)
        times = {}
        for path in ("numba", "numpy"):
            fn = impl[path]
            number = 1 if name == "lorenz_rk4" and path == "numpy" else 5
            best = min(timeit.repeat(lambda: fn(*call_args), number=number, repeat=args.repeat))
            times[path] = 1e3 * best / number
        print(f"{name:<18}{times['numba']:>12.3f}{times['numpy']:>12.3f}"
              f"{times['numpy'] / times['numba']:>9.1f}x")


if __name__ == "__main__":
    main()
