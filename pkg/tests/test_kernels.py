import numpy as np
import pytest

from navaug import _kernels


def _cases(rng, n):
    for _ in range(n):
        h = int(rng.integers(1, 9))
        w = int(rng.integers(12, 64))
        c = int(rng.integers(1, 4))
        ref = rng.random((h, w, c))
        cand = rng.random((h, w, c))
        width = int(rng.integers(2, 9))
        count = int(rng.integers(1, w // width + 1))
        start = int(rng.integers(0, w - count * width + 1))
        yield ref, cand, start, width, count


def test_numpy_path_matches_loop_reference():
    rng = np.random.default_rng(100)
    for ref, cand, start, width, count in _cases(rng, 50):
        got = _kernels.mse_windows_numpy(ref, cand, start, width, count)
        want = _kernels._mse_windows_loops(ref, cand, start, width, count)
        assert np.allclose(got, want, atol=1e-14)


@pytest.mark.skipif(not _kernels.NUMBA_ENABLED, reason="numba path disabled")
def test_numba_path_matches_numpy_path():
    rng = np.random.default_rng(101)
    for ref, cand, start, width, count in _cases(rng, 50):
        jit = _kernels.mse_windows_numba(ref, cand, start, width, count)
        ref_out = _kernels.mse_windows_numpy(ref, cand, start, width, count)
        assert np.allclose(jit, ref_out, atol=1e-14)


def test_dispatcher_points_at_active_backend():
    if _kernels.NUMBA_ENABLED:
        assert _kernels.mse_windows is _kernels.mse_windows_numba
    else:
        assert _kernels.mse_windows is _kernels.mse_windows_numpy
