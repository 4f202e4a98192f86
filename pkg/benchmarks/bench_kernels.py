"""Time the compiled path kernels against the pure-Python reference.

Usage: python3 benchmarks/bench_kernels.py [--sizes 50 200 800] [--repeat 5]
"""
import argparse
import time

import numpy as np

from bfr import simdata
from bfr._backend import compiled_kernels, python_kernels
from bfr.posterior import make_context
from bfr.samplers import log_factorials


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(n_obs: int, repeat: int, seed: int = 0):
    data = simdata.simulate(simdata.LAMBDA1, n_obs, rng=np.random.default_rng(seed))
    side = make_context(data, 1.75).minus
    k = side.k
    lf = log_factorials(k + 1)
    rng = np.random.default_rng(seed + 1)
    u = rng.random(max(k - 1, 1))
    perm = rng.permutation(max(k - 1, 1)).astype(np.int64) + 1
    rows = []
    for name, kern in (("python", python_kernels), ("compiled", compiled_kernels)):
        if kern is None:
            continue

        def sweep():
            path = np.arange(k + 1, dtype=np.int64)
            for _ in range(5):
                kern.ap_sweep(path, side.log_psi, lf, u)
            return path

        def draw():
            out = np.zeros(k + 1, dtype=np.int64)
            return kern.sip_draw(k, side.log_psi, lf, perm, u, out), out

        rows.append((name, _time(sweep, repeat) / 5, _time(draw, repeat), sweep(), draw()))
    if len(rows) == 2:
        same = np.array_equal(rows[0][3], rows[1][3]) and rows[0][4][0] == rows[1][4][0] \
            and np.array_equal(rows[0][4][1], rows[1][4][1])
    else:
        same = None
    return k, rows, same


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 200, 800])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if compiled_kernels is None:
        print("compiled kernels are not built; only the Python timings are shown")
    print(f"{'N':>6} {'side n':>7} {'backend':>9} {'AP sweep [ms]':>14} {'SIP draw [ms]':>14} {'speedup':>8} {'identical':>9}")
    for N in args.sizes:
        k, rows, same = bench(N, args.repeat)
        base = rows[0]
        for name, t_ap, t_sip, _, _ in rows:
            sp = f"{base[1] / t_ap:.0f}x" if name != "python" else ""
            print(f"{N:>6} {k:>7} {name:>9} {1e3 * t_ap:>14.3f} {1e3 * t_sip:>14.3f} {sp:>8} {str(same):>9}")


if __name__ == "__main__":
    main()
