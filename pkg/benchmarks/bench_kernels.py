"""Timing comparison of the row-kernel backends.

Runs both denoiser kernels on identical inputs through every available
backend, checks that the outputs agree, and prints per-call timings.

Usage: python benchmarks/bench_kernels.py [--rows 2000] [--repeats 200]
"""

import argparse
import math
import time

import numpy as np

from tcamp import kernels


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(
        2.0
    )


def make_case(rng, n, m):
    gamma = 10.0 ** rng.uniform(-1.0, 0.0, size=n)
    tau_sq = 0.05
    active = rng.random(n) < 0.1
    x = np.where(
        active[:, None], crandn(rng, n, m) * np.sqrt(gamma)[:, None], 0.0
    )
    pseudo = x + math.sqrt(tau_sq) * crandn(rng, n, m)
    theta = math.sqrt(tau_sq) * rng.uniform(1.0, 3.0, size=n)
    lsr = rng.normal(0.0, 1.0, size=n)
    return pseudo, theta, gamma, tau_sq, lsr


def time_call(fn, repeats):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=2000)
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}   rows={args.rows}")
    header = f"{'kernel':<18}{'M':>3}" + "".join(f"{b:>14}" for b in backends)
    if set(backends) == {"cython", "python"}:
        header += f"{'py/cy':>8}"
    print(header)

    for m in (1, 2, 4, 8):
        pseudo, theta, gamma, tau_sq, lsr = make_case(rng, args.rows, m)
        calls = {
            "soft_denoise_rows": lambda: kernels.soft_denoise_rows(pseudo, theta),
            "mmse_denoise_rows": lambda: kernels.mmse_denoise_rows(
                pseudo, gamma, tau_sq, 0.1, lsr
            ),
        }
        for name, call in calls.items():
            outputs = {}
            timings = {}
            for backend in backends:
                prev = kernels.use_backend(backend)
                try:
                    outputs[backend] = call()
                    timings[backend] = time_call(call, args.repeats)
                finally:
                    kernels.use_backend(prev)
            ref = outputs[backends[0]]
            for backend in backends[1:]:
                out, jac = outputs[backend]
                assert np.allclose(out, ref[0], rtol=1e-12, atol=1e-14)
                assert np.allclose(jac, ref[1], rtol=1e-12, atol=1e-14)
            row = f"{name:<18}{m:>3}" + "".join(
                f"{timings[b] * 1e6:>12.1f}us" for b in backends
            )
            if set(backends) == {"cython", "python"}:
                row += f"{timings['python'] / timings['cython']:>7.2f}x"
            print(row)


if __name__ == "__main__":
    main()
