"""Time the recurrent kernels compiled with numba against the same code as plain numpy.

    python3 benchmarks/bench_kernels.py --steps 128 --batch 16 --hidden 32
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from gadgetforge.nn import kernels
from gadgetforge.nn._jit import JIT_ENABLED


def _best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(T, B, E, H, rng):
    X = rng.standard_normal((T, B, E))
    M = np.ones((T, B))
    M[T // 2:, ::3] = 0.0
    Wl = rng.uniform(-0.2, 0.2, (4, H, H + E))
    bl = rng.uniform(-0.2, 0.2, (4, H))
    Wg = rng.uniform(-0.2, 0.2, (3, H, E))
    Ug = rng.uniform(-0.2, 0.2, (3, H, H))
    bg = rng.uniform(-0.2, 0.2, (3, H))
    dA = rng.standard_normal((B, H))

    def lstm(mod):
        A, C, G, Z = mod(kernels.lstm_seq_forward)(X, M, Wl, bl, True)
        return mod(kernels.lstm_seq_backward)(dA, M, Wl, A, C, G, Z, True)

    def gru(mod):
        C, G = mod(kernels.gru_seq_forward)(X, M, Wg, Ug, bg, True)
        return mod(kernels.gru_seq_backward)(dA, X, M, Wg, Ug, C, G, True)

    return {"lstm fwd+bwd": lstm, "gru fwd+bwd": gru}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=128)
    ap.add_argument("--batch", type=int, default=16)
    ap.add_argument("--embed", type=int, default=32)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    cases = _cases(args.steps, args.batch, args.embed, args.hidden, rng)
    jit = lambda f: f  # noqa: E731
    py = lambda f: f.py_func  # noqa: E731
    print(f"numba active: {JIT_ENABLED}  T={args.steps} B={args.batch} E={args.embed} H={args.hidden}")
    print(f"{'kernel':<14} {'numpy (ms)':>11} {'numba (ms)':>11} {'speedup':>8}  max |diff|")
    for name, run in cases.items():
        ref = run(py)
        out = run(jit)  # also triggers compilation outside the timed region
        diff = max(float(np.abs(a - b).max()) for a, b in zip(ref, out))
        t_py = _best_of(lambda: run(py), args.repeats)
        t_jit = _best_of(lambda: run(jit), args.repeats)
        print(f"{name:<14} {1e3 * t_py:>11.2f} {1e3 * t_jit:>11.2f} {t_py / t_jit:>7.1f}x  {diff:.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
