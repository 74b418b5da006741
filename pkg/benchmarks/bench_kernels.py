"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel and size with both timings and the speed-up,
after checking the two backends agree on the same inputs.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from fairlevel import _kernels_py

try:
    from fairlevel import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None


def _scan_inputs(rng, n):
    eta = rng.uniform(0, 1, n)
    nu = rng.normal(0, 2, n)
    weight = rng.dirichlet(np.ones(n))
    lambdas = np.unique(np.concatenate([(eta - 0.5) / nu, [0.0]]))
    return eta, nu, weight, 0.5, lambdas, 1e-12


def _edge_inputs(rng, n):
    gain = rng.normal(0, 0.1, n)
    slope = rng.normal(0, 1, n)
    return gain, slope, -0.05, 0.05


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels_c is None:
        print("compiled kernels not built; only the fallback is available")
        return 1
    rng = np.random.default_rng(0)
    cases = [("breakpoint_scan", n, _scan_inputs(rng, n)) for n in (8, 64, 512, 2048)]
    cases += [("edge_search", n, _edge_inputs(rng, n)) for n in (4, 6, 8, 10)]
    print(f"{'kernel':<16}{'units':>6}{'python ms':>12}{'cython ms':>12}{'speed-up':>10}")
    for name, n, inputs in cases:
        py_fn, c_fn = getattr(_kernels_py, name), getattr(_kernels_c, name)
        a, b = py_fn(*inputs), c_fn(*inputs)
        if name == "breakpoint_scan":
            assert np.allclose(a, b, atol=1e-12), name
        else:
            assert abs(a[0] - b[0]) <= 1e-12, name
        number = max(1, int(2000 / max(n, 1)))
        t_py = min(timeit.repeat(lambda: py_fn(*inputs), number=number, repeat=args.repeat)) / number
        t_c = min(timeit.repeat(lambda: c_fn(*inputs), number=number, repeat=args.repeat)) / number
        print(f"{name:<16}{n:>6}{t_py * 1e3:>12.4f}{t_c * 1e3:>12.4f}{t_py / t_c:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
