"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is warmed up once (numba compiles on first call) and then timed
on workloads on both sides of the dispatch crossovers in memmatch.kernels.
"""

import argparse
import time

import numpy as np

from memmatch import kernels as K


def best_of(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(rng):
    t, h = 101, 16
    Wh = rng.normal(scale=0.3, size=(h, 4 * h))
    out = []
    for B in (1, 32):
        xproj = rng.normal(size=(B, t, 4 * h))
        cache = K.lstm_forward_numpy(xproj, Wh, False)
        grad = rng.normal(size=(B, t, h))
        out.append((f"lstm forward  B={B} t={t} h={h}", K.lstm_forward_numpy, K.lstm_forward_numba, (xproj, Wh, False)))
        out.append((f"lstm backward B={B} t={t} h={h}", K.lstm_backward_numpy, K.lstm_backward_numba, (grad, Wh, False, *cache)))
    codes = rng.integers(0, 4, size=(1000, 101))
    logodds = np.concatenate([rng.normal(size=(7, 4)), np.zeros((7, 1))], axis=1)
    out.append(("pwm scan      n=1000 t=101 w=7", K.pwm_scan_numpy, K.pwm_scan_numba, (codes, logodds)))
    for n in (500, 5000):
        scores = rng.integers(0, n // 10, size=n).astype(np.float64)
        out.append((f"average ranks n={n} (ties)", K.average_ranks_numpy, K.average_ranks_numba, (scores,)))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        print("numba not installed; nothing to compare")
        return
    print(f"{'kernel':<32} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, slow, fast, fargs in workloads(np.random.default_rng(args.seed)):
        a = best_of(slow, fargs, args.repeat)
        b = best_of(fast, fargs, args.repeat)
        print(f"{name:<32} {a * 1e3:>10.3f} {b * 1e3:>10.3f} {a / b:>7.1f}x")


if __name__ == "__main__":
    main()
