"""Windowed mean-squared-error kernels.

The sliding-window MSE between frame pairs is the only hot loop in the
package (it runs once per candidate rotation per frame pair). Two
interchangeable implementations live here:

* a numba ``@njit`` kernel (default), and
* a pure-numpy fallback, selected by setting ``NAVAUG_DISABLE_NUMBA=1``
  in the environment or when numba is unavailable.

Both are importable directly so ``benchmarks/bench_kernels.py`` can time
them against each other.
"""

from __future__ import annotations

import os

import numpy as np


def _flag_set(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


def mse_windows_numpy(ref: np.ndarray, cand: np.ndarray, start: int, width: int, count: int) -> np.ndarray:
    """Per-window MSE via numpy slicing; reference fallback path."""
    out = np.empty(count, dtype=np.float64)
    for k in range(count):
        a = start + k * width
        diff = ref[:, a : a + width, :] - cand[:, a : a + width, :]
        out[k] = np.mean(diff * diff)
    return out


def _mse_windows_loops(ref, cand, start, width, count):  # pragma: no cover - jit body
    h, _, c = ref.shape
    out = np.empty(count, dtype=np.float64)
    denom = float(h * width * c)
    for k in range(count):
        a = start + k * width
        acc = 0.0
        for i in range(h):
            for j in range(a, a + width):
                for ch in range(c):
                    d = ref[i, j, ch] - cand[i, j, ch]
                    acc += d * d
        out[k] = acc / denom
    return out


NUMBA_ENABLED = False
mse_windows_numba = None

if not _flag_set("NAVAUG_DISABLE_NUMBA"):
    try:
        from numba import njit

        mse_windows_numba = njit(cache=True, nogil=True)(_mse_windows_loops)
        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        mse_windows_numba = None

if NUMBA_ENABLED:
    mse_windows = mse_windows_numba
else:
    mse_windows = mse_windows_numpy
