"""conv2d, prelu, fully_connected, residual units, stride-2 resamplers.

Forward passes are checked against quadruple-loop oracles; backward
passes against the central-difference harness (float64 shadow).
"""

import numpy as np
import pytest

from qblab.nn import (
    Conv2d,
    Downsample2,
    FullyConnected,
    Module,
    PReLU,
    ResidualConv,
    ResidualGroup,
    Sequential,
    Upsample2,
    grad_check,
)

GRAD_TOL_32 = 1e-3
GRAD_TOL_64 = 1e-6


def conv2d_oracle(x, weight, bias, stride, pad, mode):
    """Direct nested-loop cross-correlation."""
    n, c, h, w = x.shape
    o, _, k, _ = weight.shape
    np_mode = {"zero": "constant", "periodic": "wrap", "replicate": "edge"}[mode]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode=np_mode)
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    out = np.zeros((n, o, ho, wo), dtype=np.float64)
    for nn in range(n):
        for oo in range(o):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for cc in range(c):
                        for di in range(k):
                            for dj in range(k):
                                acc += (
                                    xp[nn, cc, i * stride + di, j * stride + dj]
                                    * weight[oo, cc, di, dj]
                                )
                    out[nn, oo, i, j] = acc + bias[oo]
    return out


def nudged(rng, shape, margin=0.25):
    """Random values pushed away from zero (keeps finite differences off
    the prelu kink)."""
    x = rng.standard_normal(shape)
    return (x + margin * np.sign(x)).astype(np.float64)


class TestConv2d:
    @pytest.mark.parametrize("mode", ["zero", "periodic", "replicate"])
    @pytest.mark.parametrize("stride", [1, 2])
    def test_matches_loop_oracle(self, mode, stride):
        rng = np.random.default_rng(42)
        conv = Conv2d(2, 3, 3, stride=stride, pad=1, pad_mode=mode, rng=rng, dtype=np.float64)
        x = rng.standard_normal((2, 2, 6, 8))
        got = conv.forward(x)
        want = conv2d_oracle(x, conv.weight, conv.bias, stride, 1, mode)
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_identity_impulse_kernel(self):
        conv = Conv2d(1, 1, 3, rng=np.random.default_rng(0), dtype=np.float64)
        conv.weight[...] = 0.0
        conv.weight[0, 0, 1, 1] = 1.0
        conv.bias[...] = 0.0
        x = np.random.default_rng(1).standard_normal((1, 1, 5, 7))
        np.testing.assert_allclose(conv.forward(x), x, atol=1e-15)

    def test_periodic_padding_makes_conv_shift_equivariant(self):
        rng = np.random.default_rng(7)
        conv = Conv2d(1, 2, 3, pad_mode="periodic", rng=rng, dtype=np.float64)
        x = rng.standard_normal((1, 1, 8, 8))
        base = conv.forward(x)
        rolled = conv.forward(np.roll(x, (3, 5), axis=(2, 3)))
        np.testing.assert_allclose(rolled, np.roll(base, (3, 5), axis=(2, 3)), atol=1e-12)

    @pytest.mark.parametrize("mode", ["zero", "periodic", "replicate"])
    def test_gradients_64bit(self, mode):
        rng = np.random.default_rng(3)
        for trial in range(5):
            conv = Conv2d(2, 2, 3, pad_mode=mode, rng=rng, dtype=np.float64)
            x = rng.standard_normal((1, 2, 6, 6))
            res = grad_check(conv, x, h=1e-5, rng=rng)
            assert res.max_rel_err < GRAD_TOL_64, str(res)

    def test_gradients_32bit(self):
        rng = np.random.default_rng(4)
        for trial in range(5):
            conv = Conv2d(3, 2, 3, rng=rng, dtype=np.float32)
            x = rng.standard_normal((2, 3, 6, 6)).astype(np.float32)
            res = grad_check(conv, x, h=1e-3, rng=rng)
            assert res.max_rel_err < GRAD_TOL_32, str(res)

    def test_stride2_gradients(self):
        rng = np.random.default_rng(5)
        conv = Conv2d(2, 2, 3, stride=2, pad=1, rng=rng, dtype=np.float64)
        x = rng.standard_normal((1, 2, 6, 6))
        res = grad_check(conv, x, h=1e-5, rng=rng)
        assert res.max_rel_err < GRAD_TOL_64, str(res)


class TestPReLU:
    def test_slope_one_is_identity(self):
        act = PReLU(init_slope=1.0, dtype=np.float64)
        x = np.random.default_rng(0).standard_normal((3, 4))
        np.testing.assert_array_equal(act.forward(x), x)

    def test_negative_scaling(self):
        act = PReLU(init_slope=0.3, dtype=np.float64)
        np.testing.assert_allclose(act.forward(np.array([-1.0, 2.0])), [-0.3, 2.0])

    def test_gradients(self):
        rng = np.random.default_rng(6)
        for trial in range(5):
            act = PReLU(init_slope=0.25, dtype=np.float64)
            x = nudged(rng, (2, 3, 4, 4))
            res = grad_check(act, x, h=1e-3, rng=rng)
            assert res.max_rel_err < GRAD_TOL_64, str(res)


class TestFullyConnected:
    def test_matches_matmul(self):
        rng = np.random.default_rng(8)
        fc = FullyConnected(5, 3, rng=rng, dtype=np.float64)
        x = rng.standard_normal((7, 5))
        np.testing.assert_allclose(fc.forward(x), x @ fc.weight.T + fc.bias, atol=1e-14)

    def test_gradients(self):
        rng = np.random.default_rng(9)
        for trial in range(5):
            fc = FullyConnected(6, 4, rng=rng, dtype=np.float64)
            x = rng.standard_normal((2, 3, 6))  # leading axes stay free
            res = grad_check(fc, x, h=1e-5, rng=rng)
            assert res.max_rel_err < GRAD_TOL_64, str(res)


class TestResidualUnits:
    def test_residual_conv_composition(self):
        rng = np.random.default_rng(10)
        unit = ResidualConv(3, 3, rng=rng, dtype=np.float64)
        x = rng.standard_normal((1, 3, 6, 6))
        y = unit.forward(x)
        spine = unit.act.forward(unit.conv.forward(x))
        np.testing.assert_allclose(y, x + spine, atol=1e-14)

    def test_zero_conv_is_identity(self):
        unit = ResidualConv(2, 3, rng=np.random.default_rng(0), dtype=np.float64)
        unit.conv.weight[...] = 0.0
        unit.conv.bias[...] = 0.0
        x = np.random.default_rng(1).standard_normal((1, 2, 4, 4))
        np.testing.assert_allclose(unit.forward(x), x, atol=1e-15)

    def test_gradients(self):
        rng = np.random.default_rng(11)
        for trial in range(5):
            unit = ResidualConv(2, 3, rng=rng, dtype=np.float64)
            res = grad_check(unit, nudged(rng, (1, 2, 6, 6)), h=1e-4, rng=rng)
            assert res.max_rel_err < GRAD_TOL_64, str(res)

    def test_residual_group_gradients(self):
        rng = np.random.default_rng(12)
        for trial in range(5):
            grp = ResidualGroup(2, rng=rng, dtype=np.float64)
            res = grad_check(grp, nudged(rng, (1, 2, 6, 6)), h=1e-4, rng=rng)
            assert res.max_rel_err < GRAD_TOL_64, str(res)


class TestResamplers:
    def test_shape_contracts(self):
        rng = np.random.default_rng(13)
        down = Downsample2(4, 8, rng=rng)
        up = Upsample2(8, 4, rng=rng)
        x = rng.standard_normal((2, 4, 16, 12)).astype(np.float32)
        y = down.forward(x)
        assert y.shape == (2, 8, 8, 6)
        z = up.forward(y)
        assert z.shape == (2, 4, 16, 12)

    def test_downsample_matches_strided_conv(self):
        rng = np.random.default_rng(14)
        down = Downsample2(2, 3, rng=rng, dtype=np.float64)
        x = rng.standard_normal((1, 2, 6, 8))
        want = conv2d_oracle(x, down.weight, down.bias, 2, 0, "zero")
        np.testing.assert_allclose(down.forward(x), want, atol=1e-12)

    def test_upsample_is_adjoint_of_downsample(self):
        # shared kernel, zero bias: <D(x), y> == <x, U(y)>
        rng = np.random.default_rng(15)
        for trial in range(5):
            down = Downsample2(3, 5, rng=rng, dtype=np.float64)
            up = Upsample2(5, 3, rng=rng, dtype=np.float64)
            up.weight[...] = down.weight
            down.bias[...] = 0.0
            up.bias[...] = 0.0
            x = rng.standard_normal((2, 3, 8, 8))
            y = rng.standard_normal((2, 5, 4, 4))
            lhs = float(np.sum(down.forward(x) * y))
            rhs = float(np.sum(x * up.forward(y)))
            assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))

    def test_gradients(self):
        rng = np.random.default_rng(16)
        for trial in range(5):
            down = Downsample2(2, 3, rng=rng, dtype=np.float64)
            res = grad_check(down, rng.standard_normal((1, 2, 6, 6)), h=1e-5, rng=rng)
            assert res.max_rel_err < GRAD_TOL_64, str(res)
            up = Upsample2(3, 2, rng=rng, dtype=np.float64)
            res = grad_check(up, rng.standard_normal((1, 3, 3, 3)), h=1e-5, rng=rng)
            assert res.max_rel_err < GRAD_TOL_64, str(res)

    def test_odd_dims_rejected(self):
        down = Downsample2(1, 1, rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            down.forward(np.zeros((1, 1, 5, 6), np.float32))


class TestFramework:
    def test_named_params_paths(self):
        rng = np.random.default_rng(17)
        seq = Sequential(Conv2d(1, 2, 3, rng=rng), PReLU())
        keys = set(seq.named_params())
        assert keys == {"layer0.weight", "layer0.bias", "layer1.slope"}

    def test_astype_roundtrip_values(self):
        rng = np.random.default_rng(18)
        conv = Conv2d(1, 1, 3, rng=rng, dtype=np.float32)
        clone = conv.astype(np.float64)
        assert clone.weight.dtype == np.float64
        np.testing.assert_allclose(clone.weight, conv.weight)
        # the original is untouched
        assert conv.weight.dtype == np.float32

    def test_load_tensors_validates_keys_and_shapes(self):
        rng = np.random.default_rng(19)
        conv = Conv2d(1, 2, 3, rng=rng)
        good = {k: v.copy() for k, v in conv.named_params().items()}
        conv.load_tensors(good)
        with pytest.raises(KeyError):
            conv.load_tensors({"weight": good["weight"]})
        bad = dict(good)
        bad["bias"] = np.zeros(3, np.float32)
        with pytest.raises(ValueError):
            conv.load_tensors(bad)

    def test_harness_flags_a_wrong_backward(self):
        class BadScale(Module):
            def forward(self, x):
                return 3.0 * x

            def backward(self, g):
                return 2.0 * g  # deliberately wrong

        res = grad_check(BadScale(), np.random.default_rng(0).standard_normal((3, 3)))
        assert res.max_rel_err > 0.1

    def test_forward_determinism(self):
        rng = np.random.default_rng(20)
        conv = Conv2d(2, 2, 3, rng=rng)
        x = rng.standard_normal((1, 2, 8, 8)).astype(np.float32)
        np.testing.assert_array_equal(conv.forward(x), conv.forward(x))
