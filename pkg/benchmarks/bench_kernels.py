"""Time the compiled kernels against their pure-Python twins.

    python benchmarks/bench_kernels.py [--repeat 5] [--steps 2000]

Prints one row per kernel and size with the best wall time of each
implementation and the speedup.
"""

import argparse
import time

import numpy as np

from folmi.kernels import IMPLEMENTATIONS
from folmi.sim import gl_coeffs


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng, steps):
    for n in (4, 8, 16, 32):
        m = rng.standard_normal((n, n))
        s = m + m.T
        yield f"jacobi_eigh n={n}", lambda impl, s=s: impl.jacobi_eigh(s.copy())
    for n in (4, 8, 16, 32):
        a = rng.standard_normal((n, n))

        def eig(impl, a=a):
            h = impl.hessenberg(a.copy())
            return impl.hqr_eigvals(h, 60 * a.shape[0])

        yield f"hessenberg+hqr n={n}", eig
    for n in (2, 4):
        a = rng.standard_normal((n, n)) - 3.0 * np.eye(n)
        h, alpha = 0.01, 0.3
        solve_mat = np.linalg.inv(np.eye(n) - h**alpha * a)
        had = h**alpha * 0.2 * rng.standard_normal((n, n))
        coeffs = gl_coeffs(alpha, steps + 1)
        pos = np.arange(steps + 1) - 25.0
        hist = np.ones((steps + 1, n))
        x0 = np.ones(n)

        def march(impl, args=(solve_mat, had, coeffs, x0, pos, hist)):
            sm, hd, c, x, p, hi = args
            return impl.gl_march(sm, hd, c, x.copy(), p, hi, steps, 1e12)

        yield f"gl_march n={n} steps={steps}", march


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=2000, help="GL march length")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    names = sorted(IMPLEMENTATIONS)
    if "cython" not in IMPLEMENTATIONS:
        print("compiled extension not built; timing the Python kernels only")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<28}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases(rng, args.steps):
        times = {n: best_time(lambda impl=IMPLEMENTATIONS[n]: fn(impl), args.repeat) for n in names}
        row = f"{label:<28}" + "".join(f"{times[n] * 1e3:>10.3f}ms" for n in names)
        if len(names) > 1:
            row += f"{times['python'] / times['cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
