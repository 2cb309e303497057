"""Time the numba kernel against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]

Measures the windowed-MSE kernel on frame sizes from thumbnail panoramas
up to full-resolution equirectangular strips. The numba path needs one
warm-up call to compile (cached afterwards).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from navaug._kernels import NUMBA_ENABLED, mse_windows_numba, mse_windows_numpy

# (height, width, channels, window_px): geometry mirrors RotationConfig
# defaults at several frame scales
CASES = [
    ("thumb 144x8 gray", 8, 144, 1, 32),
    ("small 512x96 rgb", 96, 512, 3, 114),
    ("medium 1024x256 rgb", 256, 1024, 3, 228),
    ("large 2048x512 rgb", 512, 2048, 3, 455),
]


def time_fn(fn, args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not NUMBA_ENABLED:
        print("numba path disabled (NAVAUG_DISABLE_NUMBA set or numba missing);")
        print("timing the numpy fallback only.")

    rng = np.random.default_rng(0)
    print(f"{'case':<22} {'windows':>7} {'numpy':>12} {'numba':>12} {'speedup':>8}")
    for name, height, width, channels, window in CASES:
        ref = rng.random((height, width, channels))
        cand = rng.random((height, width, channels))
        shift = int(round(width / 6))
        count = (width - shift) // window
        call_args = (ref, cand, shift, window, count)

        t_numpy = time_fn(mse_windows_numpy, call_args, args.repeats)
        if NUMBA_ENABLED:
            mse_windows_numba(*call_args)  # compile outside the timer
            t_numba = time_fn(mse_windows_numba, call_args, args.repeats)
            agree = np.allclose(
                mse_windows_numpy(*call_args), mse_windows_numba(*call_args), atol=1e-12
            )
            suffix = "" if agree else "  RESULTS DISAGREE"
            print(
                f"{name:<22} {count:>7} {t_numpy * 1e3:>10.3f}ms"
                f" {t_numba * 1e3:>10.3f}ms {t_numpy / t_numba:>7.1f}x{suffix}"
            )
        else:
            print(f"{name:<22} {count:>7} {t_numpy * 1e3:>10.3f}ms {'-':>12} {'-':>8}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
