"""Compare the compiled and numpy kernels on the two hot loops.

Usage: python benchmarks/bench_kernels.py [--resolution 48] [--L 24] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from cspectra import kernels
from cspectra.grid import build_grid
from cspectra.harmonics import HarmonicSpectrum, to_order_arrays


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--resolution", type=int, default=48)
    p.add_argument("--L", type=int, default=24, help="degree of the evaluated expansion")
    p.add_argument("--points", type=int, default=20000, help="evaluation points")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--threads", type=int, nargs="+", default=[1, 4])
    args = p.parse_args(argv)

    rng = np.random.default_rng(0)
    grid = build_grid(3, args.resolution)
    a, b = to_order_arrays(HarmonicSpectrum.random(3, args.L, rng))
    pts = rng.normal(size=(args.points, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    wf = grid.weights * rng.normal(size=grid.size)

    impls = [("python", kernels.python_impl)]
    if kernels.cython_impl is not None:
        impls.append(("cython", kernels.cython_impl))
    else:
        print("compiled extension not built; timing the fallback only")

    jobs = {
        f"sh_evaluate L={args.L} N={args.points}":
            lambda impl, t: kernels.sh_evaluate(a, b, pts, threads=t, impl=impl),
        f"cosine_quadrature {grid.size}x{grid.size}":
            lambda impl, t: kernels.cosine_quadrature(grid.nodes, grid.nodes, wf, threads=t,
                                                      impl=impl),
    }
    print(f"{'kernel':<36}{'backend':<9}{'threads':>8}{'seconds':>12}{'speedup':>10}")
    for name, job in jobs.items():
        ref = {}
        for t in args.threads:
            for label, impl in impls:
                sec = best_of(lambda: job(impl, t), args.repeat)
                ref.setdefault(t, sec)
                print(f"{name:<36}{label:<9}{t:>8}{sec:>12.4f}{ref[t] / sec:>9.1f}x")
        outs = [job(impl, 1) for _, impl in impls]
        gap = max(float(np.max(np.abs(o - outs[0]))) for o in outs)
        print(f"{name:<36}max backend gap {gap:.1e}")


if __name__ == "__main__":
    main()
