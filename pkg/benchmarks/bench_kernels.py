"""Time the compiled kernels against their pure-Python fallbacks.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from sofrvem._kernels import _fallback
from sofrvem.basis import clamped_knots

try:
    from sofrvem._kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _sweep_inputs(p, rng):
    G = rng.standard_normal((p, p))
    M = G @ G.T
    return (rng.uniform(0.2, 0.8, p), M, rng.standard_normal(p), rng.standard_normal(p))


def cases(rng):
    knots = clamped_knots((0.0, 1.0), 12, 3)
    grid = np.linspace(0.0, 1.0, 2000)
    yield "bspline_basis K=12, 2000 points", lambda mod: mod.bspline_basis(knots, 3, grid)
    for p in (7, 50):
        pz, M, cross, logit = _sweep_inputs(p, rng)
        yield (f"inclusion_sweep p={p}",
               lambda mod, pz=pz, M=M, c=cross, lg=logit: mod.inclusion_sweep(pz.copy(), M, c, lg, 1.3, 1e-12))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--number", type=int, default=50)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(0)
    backends = [("python", _fallback)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'kernel':<36s}" + "".join(f"{name:>14s}" for name, _ in backends) + f"{'speed-up':>12s}")
    for label, call in cases(rng):
        times = []
        for _, mod in backends:
            best = min(timeit.repeat(lambda: call(mod), repeat=args.repeat, number=args.number))
            times.append(best / args.number)
        ratio = f"{times[0] / times[1]:11.1f}x" if len(times) == 2 else f"{'n/a':>12s}"
        print(f"{label:<36s}" + "".join(f"{t * 1e6:12.1f}us" for t in times) + ratio)
    if _ckernels is None:
        print("compiled extension not available; only the fallback was timed")


if __name__ == "__main__":
    main()
