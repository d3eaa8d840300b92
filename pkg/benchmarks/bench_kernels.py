"""Compare the compiled propagation kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat 200]
"""

import argparse
import timeit

import numpy as np

from afpkit import _fallback

try:
    from afpkit import _kernels as compiled
except ImportError:
    compiled = None

CASES = [(1, 128, 2), (3, 128, 2), (3, 128, 5), (5, 128, 3), (7, 128, 3), (3, 256, 8)]


def bench(mod, phases, is_eom, offset, n, repeat):
    g = np.ones((n, n), complex)
    t_fwd = min(timeit.repeat(lambda: mod.forward(phases, is_eom, offset, n), number=repeat, repeat=3))
    _, tape = mod.forward(phases, is_eom, offset, n)
    t_bwd = min(timeit.repeat(lambda: mod.backward(phases, is_eom, offset, tape, g), number=repeat, repeat=3))
    return 1e6 * t_fwd / repeat, 1e6 * t_bwd / repeat


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    if compiled is None:
        print("compiled extension not built; only the fallback is timed")
    rng = np.random.default_rng(0)
    print(f"{'Q':>3} {'M':>4} {'n':>3}  {'numpy fwd':>10} {'numpy bwd':>10}  "
          f"{'cython fwd':>10} {'cython bwd':>10}  {'speedup':>7}")
    for q, m, n in CASES:
        phases = rng.uniform(-np.pi, np.pi, (q, m))
        is_eom = np.array([i % 2 == 0 for i in range(q)], dtype=np.uint8)
        offset = (m - n) // 2
        pf, pb = bench(_fallback, phases, is_eom, offset, n, args.repeat)
        line = f"{q:>3} {m:>4} {n:>3}  {pf:>9.1f}u {pb:>9.1f}u"
        if compiled is not None:
            cf, cb = bench(compiled, phases, is_eom, offset, n, args.repeat)
            line += f"  {cf:>9.1f}u {cb:>9.1f}u  {(pf + pb) / (cf + cb):>6.2f}x"
        print(line)


if __name__ == "__main__":
    main()
