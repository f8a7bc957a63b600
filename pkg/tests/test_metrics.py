import numpy as np
import pytest

from qblab.cfa import BAYER, QUAD, MosaicImage
from qblab.metrics import _gaussian_window, kld, psnr, ssim


def mse_oracle(a, b):
    total = 0.0
    flat_a = np.asarray(a, dtype=np.float64).ravel()
    flat_b = np.asarray(b, dtype=np.float64).ravel()
    for x, y in zip(flat_a, flat_b):
        total += (x - y) ** 2
    return total / flat_a.size


class TestPsnr:
    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(0)
        a = rng.random((13, 9))
        b = rng.random((13, 9))
        expected = 10.0 * np.log10(1.0 / mse_oracle(a, b))
        assert psnr(a, b) == pytest.approx(expected, abs=1e-9)

    def test_tenth_offset_is_twenty_db(self):
        rng = np.random.default_rng(1)
        a = rng.random((32, 32))
        assert psnr(a, a + 0.1) == pytest.approx(20.000, abs=1e-3)

    def test_identical_inputs_give_infinity(self):
        a = np.linspace(0.0, 1.0, 64).reshape(8, 8)
        assert psnr(a, a.copy()) == float("inf")

    def test_peak_rescaling_shifts_by_constant(self):
        rng = np.random.default_rng(2)
        a = rng.random((16, 16))
        b = rng.random((16, 16))
        shift = psnr(a, b, peak=2.0) - psnr(a, b, peak=1.0)
        assert shift == pytest.approx(20.0 * np.log10(2.0), abs=1e-9)

    def test_monotone_under_growing_noise(self):
        rng = np.random.default_rng(3)
        a = rng.random((64, 64))
        values = []
        for sigma in (0.01, 0.03, 0.1, 0.3):
            noisy = a + rng.normal(0.0, sigma, size=a.shape)
            values.append(psnr(a, noisy))
        assert all(x > y for x, y in zip(values, values[1:]))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            psnr(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_nonpositive_peak_rejected(self):
        with pytest.raises(ValueError, match="peak"):
            psnr(np.zeros((4, 4)), np.ones((4, 4)), peak=0.0)


def ssim_window_oracle(a, b, peak=1.0):
    """Recompute SSIM with explicit per-window loops."""
    k = 11
    kernel = _gaussian_window(k, 1.5)
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    vals = []
    for ch in range(a.shape[2]):
        for i in range(a.shape[0] - k + 1):
            for j in range(a.shape[1] - k + 1):
                wa = a[i : i + k, j : j + k, ch]
                wb = b[i : i + k, j : j + k, ch]
                mx = float(np.sum(kernel * wa))
                my = float(np.sum(kernel * wb))
                vx = float(np.sum(kernel * wa * wa)) - mx * mx
                vy = float(np.sum(kernel * wb * wb)) - my * my
                cov = float(np.sum(kernel * wa * wb)) - mx * my
                num = (2 * mx * my + c1) * (2 * cov + c2)
                den = (mx * mx + my * my + c1) * (vx + vy + c2)
                vals.append(num / den)
    return float(np.mean(vals))


class TestSsim:
    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(0)
        a = rng.random((16, 14, 3))
        b = np.clip(a + rng.normal(0.0, 0.1, size=a.shape), 0.0, 1.0)
        assert ssim(a, b) == pytest.approx(ssim_window_oracle(a, b), abs=1e-10)

    def test_self_comparison_is_exactly_one(self):
        rng = np.random.default_rng(1)
        a = rng.random((24, 24, 3))
        assert ssim(a, a.copy()) == 1.0

    def test_constant_images_match_closed_form(self):
        c1v, c2v = 0.3, 0.7
        a = np.full((16, 16), c1v)
        b = np.full((16, 16), c2v)
        k1 = (0.01 * 1.0) ** 2
        expected = (2 * c1v * c2v + k1) / (c1v * c1v + c2v * c2v + k1)
        assert ssim(a, b) == pytest.approx(expected, abs=1e-7)

    def test_inverted_binary_image_scores_negative(self):
        rng = np.random.default_rng(2)
        a = (rng.random((32, 32)) > 0.5).astype(np.float64)
        assert ssim(a, 1.0 - a) < -0.5

    def test_bounded_by_one_in_magnitude(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            a = rng.random((20, 20, 3))
            b = rng.random((20, 20, 3))
            v = ssim(a, b)
            assert -1.0 - 1e-12 <= v <= 1.0 + 1e-12

    def test_grayscale_equals_single_channel(self):
        rng = np.random.default_rng(4)
        a = rng.random((16, 16))
        b = rng.random((16, 16))
        assert ssim(a, b) == ssim(a[:, :, None], b[:, :, None])

    def test_degrades_with_noise(self):
        rng = np.random.default_rng(5)
        base = rng.random((48, 48, 3))
        small = np.clip(base + rng.normal(0.0, 0.02, size=base.shape), 0, 1)
        large = np.clip(base + rng.normal(0.0, 0.25, size=base.shape), 0, 1)
        assert ssim(base, small) > ssim(base, large)

    def test_too_small_image_rejected(self):
        with pytest.raises(ValueError, match="at least"):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            ssim(np.zeros((16, 16)), np.zeros((16, 18)))


def kld_phase_oracle(a, b, bins, eps=1e-10):
    """Per-phase histogram KLD with explicit loops and scalar bin math."""
    pr, pc = a.pattern.period_rows, a.pattern.period_cols
    span = a.white_level - a.black_level
    divergences = []
    for pi in range(pr):
        for pj in range(pc):
            va, vb = [], []
            for i in range(pi, a.height, pr):
                for j in range(pj, a.width, pc):
                    va.append(float(a.samples[i, j]))
                    vb.append(float(b.samples[i, j]))

            def hist(values):
                counts = [0] * bins
                for v in values:
                    idx = int((v - a.black_level) / span * bins)
                    counts[min(max(idx, 0), bins - 1)] += 1
                mass = [c / len(values) + eps for c in counts]
                norm = sum(mass)
                return [m / norm for m in mass]

            p, q = hist(va), hist(vb)
            divergences.append(sum(pi_ * np.log(pi_ / qi_) for pi_, qi_ in zip(p, q)))
    return float(np.mean(divergences))


def random_mosaic(rng, pattern=BAYER, size=16):
    return MosaicImage(rng.random((size, size), dtype=np.float32), pattern)


class TestKld:
    def test_self_comparison_is_exactly_zero(self):
        rng = np.random.default_rng(0)
        a = random_mosaic(rng)
        b = MosaicImage(a.samples.copy(), BAYER)
        assert kld(a, b) == 0.0

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(1)
        a = random_mosaic(rng, size=24)
        b = random_mosaic(rng, size=24)
        got = kld(a, b, bins=16)
        assert got == pytest.approx(kld_phase_oracle(a, b, bins=16), rel=1e-9)

    def test_quad_pattern_uses_sixteen_phases(self):
        rng = np.random.default_rng(2)
        a = random_mosaic(rng, QUAD, size=32)
        b = random_mosaic(rng, QUAD, size=32)
        got = kld(a, b, bins=8)
        assert got == pytest.approx(kld_phase_oracle(a, b, bins=8), rel=1e-9)

    def test_disjoint_support_matches_hand_value(self):
        # every a-sample lands in bin 0, every b-sample in bin 1
        a = MosaicImage(np.full((8, 8), 0.25, dtype=np.float32), BAYER)
        b = MosaicImage(np.full((8, 8), 0.75, dtype=np.float32), BAYER)
        eps = 1e-10
        p0 = (1.0 + eps) / (1.0 + 2.0 * eps)
        p1 = eps / (1.0 + 2.0 * eps)
        expected = p0 * np.log(p0 / p1) + p1 * np.log(p1 / p0)
        got = kld(a, b, bins=2)
        assert got == pytest.approx(expected, rel=1e-9)
        assert 22.0 < got < 24.0  # bounded by the smoothing floor, ~ln(1e10)

    def test_nonnegative_on_random_pairs(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            a = random_mosaic(rng)
            b = random_mosaic(rng)
            assert kld(a, b) >= -1e-12

    def test_single_phase_shift_averages_over_phases(self):
        base = np.full((16, 16), 0.3, dtype=np.float32)
        moved = base.copy()
        moved[0::2, 0::2] = 0.7
        a = MosaicImage(base, BAYER)
        b = MosaicImage(moved, BAYER)
        got = kld(a, b, bins=4)
        assert got == pytest.approx(kld_phase_oracle(a, b, bins=4), rel=1e-9)
        # three of the four phases are identical and contribute zero, so the
        # result is a quarter of the lone disjoint-support divergence
        eps = 1e-10
        p0 = (1.0 + eps) / (1.0 + 4.0 * eps)
        p1 = eps / (1.0 + 4.0 * eps)
        lone = p0 * np.log(p0 / p1) + p1 * np.log(p1 / p0)
        assert got == pytest.approx(lone / 4.0, rel=1e-9)

    def test_pattern_mismatch_rejected(self):
        rng = np.random.default_rng(4)
        with pytest.raises(ValueError, match="pattern"):
            kld(random_mosaic(rng, BAYER), random_mosaic(rng, QUAD))

    def test_level_mismatch_rejected(self):
        a = MosaicImage(np.full((8, 8), 0.5, dtype=np.float32), BAYER)
        b = MosaicImage(np.full((8, 8), 0.5, dtype=np.float32), BAYER, white_level=2.0)
        with pytest.raises(ValueError, match="levels"):
            kld(a, b)

    def test_bad_bin_count_rejected(self):
        rng = np.random.default_rng(5)
        a = random_mosaic(rng)
        with pytest.raises(ValueError, match="bins"):
            kld(a, a, bins=1)
