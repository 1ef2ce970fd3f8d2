"""Compare the compiled and pure-Python kernels on representative sizes.

Run with ``python benchmarks/bench_kernels.py`` after building the extension
(``pip install -e . --no-build-isolation``). Each line reports the best of
several repeats per backend and the speed-up of the compiled version.
"""

import argparse
import timeit

import numpy as np

from grridge._kernels import _kernels_py

try:
    from grridge._kernels import _ckernels
except ImportError:
    _ckernels = None


def _pava_case(n, rng):
    # noisy increasing trend: many short violating runs to pool
    y = np.linspace(0, 1, n) + rng.normal(0, 0.3, n)
    w = rng.uniform(0.5, 2.0, n)
    return lambda impl: impl.pava(y, w, True)


def _gram_case(p, n, G, rng):
    M = np.ascontiguousarray(rng.standard_normal((p, n)))
    g = rng.integers(0, G, p).astype(np.intp)
    return lambda impl: impl.group_gram(M, g, G)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)

    cases = [
        ("pava n=100", _pava_case(100, rng)),
        ("pava n=10000", _pava_case(10_000, rng)),
        ("pava n=1000000", _pava_case(1_000_000, rng)),
        ("group_gram p=2000 n=100 G=10", _gram_case(2000, 100, 10, rng)),
        ("group_gram p=40000 n=100 G=8", _gram_case(40_000, 100, 8, rng)),
        ("group_gram p=10000 n=50 G=950", _gram_case(10_000, 50, 950, rng)),
    ]
    backends = [("python", _kernels_py)]
    if _ckernels is None:
        print("compiled extension not built; timing the Python fallback only")
    else:
        backends.append(("cython", _ckernels))

    print(f"{'case':34s}" + "".join(f"{name:>12s}" for name, _ in backends) + "   speed-up")
    for label, case in cases:
        times = []
        for _, impl in backends:
            number = 1
            t = min(timeit.repeat(lambda: case(impl), number=number, repeat=args.repeat))
            times.append(t)
        row = f"{label:34s}" + "".join(f"{t * 1e3:10.3f}ms" for t in times)
        if len(times) == 2:
            row += f"   {times[0] / times[1]:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
