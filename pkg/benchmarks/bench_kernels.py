"""Compare the numba and numpy E-step kernels.

Usage: python3 benchmarks/bench_kernels.py [--patterns 20000] [--items 14] [--repeat 20]

Both kernels are checked for agreement before timing.  The first numba call
(compilation, or loading from the on-disk cache) is excluded.
"""

import argparse
import time

import numpy as np

from lcirt import _kernels


def best_of(func, args, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        func(*args)
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--patterns", type=int, default=20000)
    ap.add_argument("--items", type=int, default=14)
    ap.add_argument("--classes", type=int, default=3)
    ap.add_argument("--categories", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _kernels.pattern_logprob_numba is None:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(args.seed)
    k, r, L, P = args.classes, args.items, args.categories, args.patterns
    lam = rng.dirichlet(np.ones(L), size=(k, r))
    log_lam = np.log(lam)
    patterns = rng.integers(0, L, size=(P, r)).astype(np.int64)
    weights = rng.random((k, P))

    a = _kernels.pattern_logprob_numpy(log_lam, patterns)
    b = _kernels.pattern_logprob_numba(log_lam, patterns)
    c = _kernels.category_counts_numpy(weights, patterns, L)
    d = _kernels.category_counts_numba(weights, patterns, L)
    assert np.allclose(a, b, rtol=0, atol=1e-12), "gather kernels disagree"
    assert np.allclose(c, d, rtol=1e-12, atol=1e-9), "scatter kernels disagree"

    print(f"k={k} r={r} L={L} patterns={P}, best of {args.repeat}")
    print(f"{'kernel':<18}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, fn_np, fn_nb, fargs in (
        ("pattern_logprob", _kernels.pattern_logprob_numpy, _kernels.pattern_logprob_numba,
         (log_lam, patterns)),
        ("category_counts", _kernels.category_counts_numpy, _kernels.category_counts_numba,
         (weights, patterns, L)),
    ):
        t_np = best_of(fn_np, fargs, args.repeat)
        t_nb = best_of(fn_nb, fargs, args.repeat)
        print(f"{name:<18}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>10.1f}x")


if __name__ == "__main__":
    main()
