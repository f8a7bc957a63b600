"""Orthonormal Haar transform: exact inversion, energy, adjoint."""

import numpy as np
import pytest

from qblab.nn import HaarDWT, HaarIWT, grad_check, haar_dwt, haar_iwt


def dwt_oracle(x):
    """Per-block 2x2 loop version of one analysis level."""
    n, c, h, w = x.shape
    out = np.zeros((n, 4 * c, h // 2, w // 2), dtype=x.dtype)
    for nn in range(n):
        for cc in range(c):
            for i in range(h // 2):
                for j in range(w // 2):
                    a = x[nn, cc, 2 * i, 2 * j]
                    b = x[nn, cc, 2 * i, 2 * j + 1]
                    d = x[nn, cc, 2 * i + 1, 2 * j]
                    e = x[nn, cc, 2 * i + 1, 2 * j + 1]
                    out[nn, cc, i, j] = (a + b + d + e) / 2
                    out[nn, c + cc, i, j] = (-a - b + d + e) / 2
                    out[nn, 2 * c + cc, i, j] = (-a + b - d + e) / 2
                    out[nn, 3 * c + cc, i, j] = (a - b - d + e) / 2
    return out


class TestHaar:
    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((2, 2, 6, 8))
        np.testing.assert_allclose(haar_dwt(x), dwt_oracle(x), atol=1e-14)

    def test_roundtrip_hundred_random_tensors(self):
        rng = np.random.default_rng(1)
        for trial in range(100):
            h = 2 * int(rng.integers(1, 16))
            w = 2 * int(rng.integers(1, 16))
            c = int(rng.integers(1, 4))
            x = rng.standard_normal((1, c, h, w)).astype(np.float32)
            back = haar_iwt(haar_dwt(x))
            assert np.abs(back - x).max() <= 1e-6

    def test_synthesis_then_analysis_roundtrip(self):
        rng = np.random.default_rng(2)
        y = rng.standard_normal((2, 8, 5, 7)).astype(np.float32)
        np.testing.assert_allclose(haar_dwt(haar_iwt(y)), y, atol=1e-6)

    def test_constant_concentrates_in_ll(self):
        x = np.full((1, 1, 8, 8), 0.3)
        y = haar_dwt(x)
        np.testing.assert_allclose(y[:, 0], 0.6)  # LL holds 2v
        np.testing.assert_allclose(y[:, 1:], 0.0, atol=1e-15)

    def test_energy_preserved(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((1, 3, 16, 16))
        assert abs(np.sum(haar_dwt(x) ** 2) - np.sum(x**2)) < 1e-10

    def test_odd_dims_rejected(self):
        with pytest.raises(ValueError):
            haar_dwt(np.zeros((1, 1, 5, 6)))
        with pytest.raises(ValueError):
            haar_iwt(np.zeros((1, 3, 4, 4)))

    def test_module_gradients(self):
        rng = np.random.default_rng(4)
        for trial in range(5):
            res = grad_check(HaarDWT(), rng.standard_normal((1, 2, 8, 8)), h=1e-5, rng=rng)
            assert res.max_rel_err < 1e-6, str(res)
            res = grad_check(HaarIWT(), rng.standard_normal((1, 4, 4, 4)), h=1e-5, rng=rng)
            assert res.max_rel_err < 1e-6, str(res)
