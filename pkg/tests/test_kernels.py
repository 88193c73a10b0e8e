import os
import subprocess
import sys

import numpy as np
import pytest

from memmatch import kernels as K

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")


def random_logodds(rng, w):
    lo = rng.normal(size=(w, 5))
    lo[:, 4] = 0.0
    return lo


class TestPwmScan:
    def test_hand_case(self):
        codes = np.array([[0, 1, 0, 4]])
        lo = np.array([[1.0, 0.0, 0.0, 0.0, 0.0], [0.0, 2.0, 0.0, 0.0, 0.0]])
        best, where = K.pwm_scan_numpy(codes, lo)
        assert best.tolist() == [3.0] and where.tolist() == [0]

    def test_ties_pick_leftmost(self):
        codes = np.zeros((1, 6), dtype=np.int64)
        best, where = K.pwm_scan_numpy(codes, np.ones((2, 5)))
        assert where[0] == 0 and best[0] == 2.0

    @needs_numba
    def test_numba_matches_numpy_bitwise(self, rng):
        for _ in range(50):
            w = int(rng.integers(1, 9))
            codes = rng.integers(0, 5, size=(int(rng.integers(1, 20)), int(rng.integers(w, 60))))
            lo = random_logodds(rng, w)
            a = K.pwm_scan_numpy(codes, lo)
            b = K.pwm_scan_numba(codes, lo)
            assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


class TestRanks:
    def test_ties_averaged(self):
        np.testing.assert_array_equal(K.average_ranks_numpy(np.array([3.0, 1.0, 3.0, 2.0])), [3.5, 1, 3.5, 2])

    @needs_numba
    def test_numba_matches_numpy(self, rng):
        for _ in range(100):
            x = rng.integers(0, 6, size=int(rng.integers(1, 80))).astype(float)
            assert np.array_equal(K.average_ranks_numpy(x), K.average_ranks_numba(x))


@needs_numba
@pytest.mark.parametrize("reverse", [False, True])
def test_lstm_numba_matches_numpy(reverse, rng):
    B, t, h = 3, 7, 4
    xproj = rng.normal(size=(B, t, 4 * h))
    Wh = rng.normal(scale=0.5, size=(h, 4 * h))
    fa = K.lstm_forward_numpy(xproj, Wh, reverse)
    fb = K.lstm_forward_numba(xproj, Wh, reverse)
    for a, b in zip(fa, fb):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)
    g = rng.normal(size=(B, t, h))
    ba = K.lstm_backward_numpy(g, Wh, reverse, *fa)
    bb = K.lstm_backward_numba(g, Wh, reverse, *fa)
    for a, b in zip(ba, bb):
        np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-13)


def test_env_flag_selects_numpy_path():
    code = "from memmatch import kernels as K; print(K.DISABLE_NUMBA)"
    env = dict(os.environ, MEMMATCH_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "True"


def test_numpy_fallback_end_to_end():
    code = (
        "import numpy as np\n"
        "from memmatch import model as M\n"
        "hp = M.HyperParams(ell=2, p=2, d=4, t=9)\n"
        "print(repr(float(M.forward('ACGTACGTA', M.ModelParams.init(hp, seed=3)).y[1])))\n"
    )
    results = []
    for flag in ("1", "0"):
        env = dict(os.environ, MEMMATCH_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        results.append(float(out.stdout))
    assert results[0] == pytest.approx(results[1], rel=1e-12)


@pytest.mark.parametrize("batch", [1, K.LSTM_FORWARD_NUMBA_MAX_BATCH + 1])
def test_dispatch_agrees_across_crossover(batch, rng):
    xproj = rng.normal(size=(batch, 6, 8))
    Wh = rng.normal(size=(2, 8))
    for a, b in zip(K.lstm_forward(xproj, Wh, False), K.lstm_forward_numpy(xproj, Wh, False)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)
    x = rng.integers(0, 5, size=K.RANKS_NUMBA_MAX + batch).astype(float)
    assert np.array_equal(K.average_ranks(x), K.average_ranks_numpy(x))
