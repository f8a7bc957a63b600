"""Sensor noise model tests: gain law, variance, determinism, clamping."""

import numpy as np
import pytest

from qblab.cfa import BAYER, QUAD, MosaicImage
from qblab.noise import NoiseParams, add_noise


class TestGain:
    def test_gain_decibel_law(self):
        assert NoiseParams(0.0).gain == pytest.approx(1.0)
        assert NoiseParams(24.0).gain == pytest.approx(10.0 ** 1.2)
        assert NoiseParams(42.0).gain == pytest.approx(10.0 ** 2.1)
        assert NoiseParams(20.0).gain == pytest.approx(10.0)

    def test_param_validation(self):
        with pytest.raises(ValueError):
            NoiseParams(read_sigma_base=-0.1)
        with pytest.raises(ValueError):
            NoiseParams(seed=-1)
        with pytest.raises(ValueError):
            NoiseParams(seed=2**64)


class TestNoiseStatistics:
    def test_variance_matches_read_plus_shot(self):
        # constant 0.25 plane, gain 24 dB, read 0.01, shot 0.001.  Wide
        # black/white levels keep every sample inside the clamp range so
        # the empirical variance sees the raw Gaussian model.
        m = MosaicImage(
            np.full((1024, 1024), 0.25, np.float32), QUAD, black_level=-10.0, white_level=10.0
        )
        p = NoiseParams(gain_db=24.0, read_sigma_base=0.01, shot_scale_base=0.001, seed=99)
        noisy = add_noise(m, p)
        g = p.gain
        expected = g * g * 0.01**2 + g * 0.001 * 0.25
        got = float(np.var(noisy.samples.astype(np.float64) - 0.25))
        assert abs(got - expected) / expected < 0.02

    def test_mean_preserved_before_clamping(self):
        m = MosaicImage(
            np.full((512, 512), 0.5, np.float32), BAYER, black_level=-10.0, white_level=10.0
        )
        p = NoiseParams(gain_db=24.0, seed=3)
        noisy = add_noise(m, p)
        sigma = np.sqrt(p.gain**2 * p.read_sigma_base**2 + p.gain * p.shot_scale_base * 0.5)
        # mean of n iid draws has sd sigma/sqrt(n); allow 4 sd
        assert abs(float(noisy.samples.mean()) - 0.5) < 4 * sigma / 512

    def test_shot_variance_scales_with_signal(self):
        # read noise off: variance at signal 0.8 must be ~4x that at 0.2
        rng_img = np.full((512, 512), 0.2, np.float32)
        lo = MosaicImage(rng_img, BAYER, -10, 10)
        hi = MosaicImage(rng_img * 4, BAYER, -10, 10)
        p = NoiseParams(gain_db=12.0, read_sigma_base=0.0, shot_scale_base=0.002, seed=5)
        v_lo = np.var(add_noise(lo, p).samples.astype(np.float64) - 0.2)
        v_hi = np.var(add_noise(hi, p).samples.astype(np.float64) - 0.8)
        assert v_hi / v_lo == pytest.approx(4.0, rel=0.05)

    def test_zero_noise_is_identity(self):
        rng = np.random.default_rng(1)
        m = MosaicImage(rng.random((8, 8), dtype=np.float32), QUAD)
        p = NoiseParams(gain_db=24.0, read_sigma_base=0.0, shot_scale_base=0.0, seed=7)
        np.testing.assert_array_equal(add_noise(m, p).samples, m.samples)


class TestDeterminismAndClamping:
    def test_same_seed_bitwise_identical(self):
        rng = np.random.default_rng(2)
        m = MosaicImage(rng.random((64, 64), dtype=np.float32), QUAD)
        p = NoiseParams(gain_db=42.0, seed=1234)
        a = add_noise(m, p)
        b = add_noise(m, p)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_different_seeds_differ(self):
        m = MosaicImage(np.full((64, 64), 0.5, np.float32), QUAD)
        a = add_noise(m, NoiseParams(gain_db=24.0, seed=1))
        b = add_noise(m, NoiseParams(gain_db=24.0, seed=2))
        assert not np.array_equal(a.samples, b.samples)

    def test_output_clamped_to_range(self):
        m = MosaicImage(np.full((256, 256), 0.9, np.float32), QUAD)
        noisy = add_noise(m, NoiseParams(gain_db=42.0, seed=11))
        assert noisy.samples.min() >= m.black_level
        assert noisy.samples.max() <= m.white_level
        # at 42 dB the tails definitely hit both rails
        assert np.any(noisy.samples == m.black_level)
        assert np.any(noisy.samples == m.white_level)

    def test_pattern_and_levels_carried_over(self):
        m = MosaicImage(np.full((8, 8), 0.5, np.float32), QUAD, 0.0, 2.0)
        noisy = add_noise(m, NoiseParams(seed=0))
        assert noisy.pattern is QUAD
        assert noisy.black_level == 0.0 and noisy.white_level == 2.0
