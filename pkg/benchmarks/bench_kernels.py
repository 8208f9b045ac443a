"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py --frames 300 --bins 257 --channels 2 3 4
"""
import argparse
import timeit

import numpy as np

from wmdld import _pykernels

try:
    from wmdld import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def run(frames, bins, channels, q, sources, repeat, seed):
    rng = np.random.default_rng(seed)
    rows = []
    for K in channels:
        re = rng.standard_normal((K, frames, bins))
        im = rng.standard_normal((K, frames, bins))
        means = rng.standard_normal((sources, K))
        means /= np.linalg.norm(means, axis=1, keepdims=True)
        cases = {
            "confidence": lambda mod: mod.neighborhood_confidence(re, im, q),
            "assign": lambda mod: mod.assign_labels(re, im, means),
        }
        for name, call in cases.items():
            t_py = best_of(lambda: call(_pykernels), repeat)
            t_c = best_of(lambda: call(_kernels), repeat) if _kernels else float("nan")
            rows.append((name, K, t_py, t_c))
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--frames", type=int, default=300)
    p.add_argument("--bins", type=int, default=257)
    p.add_argument("--channels", type=int, nargs="+", default=[2, 3, 4])
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--sources", type=int, default=4)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if _kernels is None:
        print("compiled kernels are not built; only the fallback is timed")

    rows = run(args.frames, args.bins, args.channels, args.q, args.sources, args.repeat,
               args.seed)
    print(f"{'kernel':<12}{'K':>3}{'python s':>12}{'compiled s':>12}{'speedup':>9}")
    for name, K, t_py, t_c in rows:
        print(f"{name:<12}{K:>3}{t_py:>12.4f}{t_c:>12.4f}{t_py / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
