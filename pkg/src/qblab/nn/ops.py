"""Plain kernels: conv2d, prelu, fully connected, residual units,
stride-2 resamplers.

Layout is NCHW throughout.  conv2d computes cross-correlation (no kernel
flip), the convention every deep-learning stack uses; implementation is
im2col plus one BLAS matmul per layer.
"""

from __future__ import annotations

import numpy as np

from .module import Module

PAD_MODES = ("zero", "periodic", "replicate")
_NP_PAD = {"zero": "constant", "periodic": "wrap", "replicate": "edge"}


def fan_init(rng: np.random.Generator, shape, fan_in: int, dtype=np.float32) -> np.ndarray:
    """1/fan_in variance scaling: keeps activation scale roughly unit
    through long non-residual chains."""
    return (rng.standard_normal(shape) / np.sqrt(fan_in)).astype(dtype)


def pad2d(x: np.ndarray, ph: int, pw: int, mode: str) -> np.ndarray:
    if mode not in PAD_MODES:
        raise ValueError(f"unknown padding mode {mode!r}")
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)), mode=_NP_PAD[mode])


def pad2d_adjoint(gpad: np.ndarray, ph: int, pw: int, mode: str, height: int, width: int):
    """Fold the gradient of a padded tensor back onto the unpadded one."""
    if ph == 0 and pw == 0:
        return gpad
    if mode == "zero":
        return gpad[:, :, ph : ph + height, pw : pw + width]
    # fold rows first, then columns
    rows = gpad[:, :, ph : ph + height, :].copy()
    if mode == "periodic":
        if ph:
            rows[:, :, height - ph :, :] += gpad[:, :, :ph, :]
            rows[:, :, :ph, :] += gpad[:, :, height + ph :, :]
    else:  # replicate
        if ph:
            rows[:, :, 0, :] += gpad[:, :, :ph, :].sum(axis=2)
            rows[:, :, -1, :] += gpad[:, :, height + ph :, :].sum(axis=2)
    out = rows[:, :, :, pw : pw + width].copy()
    if mode == "periodic":
        if pw:
            out[:, :, :, width - pw :] += rows[:, :, :, :pw]
            out[:, :, :, :pw] += rows[:, :, :, width + pw :]
    else:
        if pw:
            out[:, :, :, 0] += rows[:, :, :, :pw].sum(axis=3)
            out[:, :, :, -1] += rows[:, :, :, width + pw :].sum(axis=3)
    return out


def im2col(x: np.ndarray, k: int, stride: int, pad: int, mode: str):
    """Patch matrix (N, Ho, Wo, C*k*k) plus the geometry for col2im."""
    n, c, h, w = x.shape
    xp = pad2d(x, pad, pad, mode)
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]  # (N, C, Ho, Wo, k, k)
    ho, wo = win.shape[2], win.shape[3]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n, ho, wo, c * k * k)
    return cols, (x.shape, k, stride, pad, mode, ho, wo)


def col2im(gcols: np.ndarray, geom) -> np.ndarray:
    """Adjoint of im2col: scatter patch gradients back onto the input."""
    (n, c, h, w), k, stride, pad, mode, ho, wo = geom
    g6 = gcols.reshape(n, ho, wo, c, k, k).transpose(0, 3, 1, 2, 4, 5)
    gpad = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=gcols.dtype)
    for di in range(k):
        for dj in range(k):
            gpad[:, :, di : di + stride * ho : stride, dj : dj + stride * wo : stride] += g6[
                :, :, :, :, di, dj
            ]
    return pad2d_adjoint(gpad, pad, pad, mode, h, w)


class Conv2d(Module):
    """Cross-correlation with bias. 'same' zero padding by default."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int = 3,
        stride: int = 1,
        pad: int | None = None,
        pad_mode: str = "zero",
        rng: np.random.Generator | None = None,
        dtype=np.float32,
    ):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.pad = kernel_size // 2 if pad is None else pad
        self.pad_mode = pad_mode
        fan_in = in_channels * kernel_size * kernel_size
        self.add_param(
            "weight", fan_init(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in, dtype)
        )
        self.add_param("bias", np.zeros(out_channels, dtype=dtype))

    def forward(self, x):
        n = x.shape[0]
        cols, geom = im2col(x, self.kernel_size, self.stride, self.pad, self.pad_mode)
        ho, wo = geom[-2], geom[-1]
        wf = self.weight.reshape(self.out_channels, -1)
        y = cols.reshape(n, ho * wo, -1) @ wf.T + self.bias
        self._cache = (cols, geom)
        return np.ascontiguousarray(y.reshape(n, ho, wo, self.out_channels).transpose(0, 3, 1, 2))

    def backward(self, grad_out):
        cols, geom = self._cache
        n = grad_out.shape[0]
        ho, wo = geom[-2], geom[-1]
        g2 = grad_out.transpose(0, 2, 3, 1).reshape(n, ho * wo, self.out_channels)
        flat_cols = cols.reshape(n, ho * wo, -1)
        gw = np.tensordot(g2, flat_cols, axes=([0, 1], [0, 1]))
        self.grads["weight"] += gw.reshape(self.weight.shape)
        self.grads["bias"] += g2.sum(axis=(0, 1))
        gcols = g2 @ self.weight.reshape(self.out_channels, -1)
        return col2im(gcols.reshape(n, ho, wo, -1), geom)


class PReLU(Module):
    """max(x, 0) + slope * min(x, 0) with one learnable slope."""

    def __init__(self, init_slope: float = 0.25, dtype=np.float32):
        super().__init__()
        self.add_param("slope", np.array([init_slope], dtype=dtype))

    def forward(self, x):
        self._cache = x
        return np.where(x > 0, x, self.slope[0] * x)

    def backward(self, grad_out):
        x = self._cache
        neg = x <= 0
        self.grads["slope"] += np.array([np.sum(grad_out * x * neg)], dtype=self.slope.dtype)
        return grad_out * np.where(neg, self.slope[0], np.asarray(1.0, dtype=x.dtype))


class FullyConnected(Module):
    """Affine map on the trailing axis: y = x W^T + b."""

    def __init__(self, in_features: int, out_features: int, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.add_param("weight", fan_init(rng, (out_features, in_features), in_features, dtype))
        self.add_param("bias", np.zeros(out_features, dtype=dtype))

    def forward(self, x):
        self._cache = x
        return x @ self.weight.T + self.bias

    def backward(self, grad_out):
        x = self._cache
        flat_g = grad_out.reshape(-1, grad_out.shape[-1])
        flat_x = x.reshape(-1, x.shape[-1])
        self.grads["weight"] += flat_g.T @ flat_x
        self.grads["bias"] += flat_g.sum(axis=0)
        return grad_out @ self.weight


# residual spines start damped so a deep stack of skip-connected blocks
# keeps unit-scale activations (variance would otherwise double per block)
RESIDUAL_DAMP = 0.1


class ResidualConv(Module):
    """One residual convolution unit: y = x + prelu(conv_kxk(x))."""

    def __init__(self, channels: int, kernel_size: int = 3, rng=None, dtype=np.float32):
        super().__init__()
        self.add_child("conv", Conv2d(channels, channels, kernel_size, rng=rng, dtype=dtype))
        self.conv.weight *= RESIDUAL_DAMP
        self.add_child("act", PReLU(dtype=dtype))

    def forward(self, x):
        return x + self.act(self.conv(x))

    def backward(self, grad_out):
        return grad_out + self.conv.backward(self.act.backward(grad_out))


class ResidualGroup(Module):
    """Two (Conv3x3 + PReLU) stages with a skip around both."""

    def __init__(self, channels: int, rng=None, dtype=np.float32):
        super().__init__()
        self.add_child("conv1", Conv2d(channels, channels, 3, rng=rng, dtype=dtype))
        self.add_child("act1", PReLU(dtype=dtype))
        self.add_child("conv2", Conv2d(channels, channels, 3, rng=rng, dtype=dtype))
        self.conv2.weight *= RESIDUAL_DAMP
        self.add_child("act2", PReLU(dtype=dtype))

    def forward(self, x):
        return x + self.act2(self.conv2(self.act1(self.conv1(x))))

    def backward(self, grad_out):
        g = self.act2.backward(grad_out)
        g = self.conv2.backward(g)
        g = self.act1.backward(g)
        return grad_out + self.conv1.backward(g)


def _space_to_blocks(x):
    """(N, C, H, W) -> (N, H/2 * W/2, C*4) with (c, di, dj) minor order."""
    n, c, h, w = x.shape
    b = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 2, 4, 1, 3, 5)
    return np.ascontiguousarray(b).reshape(n, (h // 2) * (w // 2), c * 4)


def _blocks_to_space(blocks, n, c, h, w):
    b = blocks.reshape(n, h // 2, w // 2, c, 2, 2).transpose(0, 3, 1, 4, 2, 5)
    return np.ascontiguousarray(b).reshape(n, c, h, w)


class Downsample2(Module):
    """2x2 stride-2 convolution; halves H and W."""

    def __init__(self, in_channels: int, out_channels: int, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.add_param("weight", fan_init(rng, (out_channels, in_channels, 2, 2), in_channels * 4, dtype))
        self.add_param("bias", np.zeros(out_channels, dtype=dtype))

    def forward(self, x):
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ValueError("downsample_s2 needs even spatial dims")
        blocks = _space_to_blocks(x)
        self._cache = (blocks, x.shape)
        y = blocks @ self.weight.reshape(self.out_channels, -1).T + self.bias
        return np.ascontiguousarray(
            y.reshape(n, h // 2, w // 2, self.out_channels).transpose(0, 3, 1, 2)
        )

    def backward(self, grad_out):
        blocks, (n, c, h, w) = self._cache
        g2 = grad_out.transpose(0, 2, 3, 1).reshape(n, -1, self.out_channels)
        self.grads["weight"] += np.tensordot(g2, blocks, axes=([0, 1], [0, 1])).reshape(
            self.weight.shape
        )
        self.grads["bias"] += g2.sum(axis=(0, 1))
        gblocks = g2 @ self.weight.reshape(self.out_channels, -1)
        return _blocks_to_space(gblocks, n, c, h, w)


class Upsample2(Module):
    """2x2 stride-2 transposed convolution; doubles H and W.

    With a shared kernel this is exactly the adjoint of Downsample2's
    linear map (weight shape (in_channels, out_channels, 2, 2)).
    """

    def __init__(self, in_channels: int, out_channels: int, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.add_param("weight", fan_init(rng, (in_channels, out_channels, 2, 2), in_channels, dtype))
        self.add_param("bias", np.zeros(out_channels, dtype=dtype))

    def forward(self, x):
        n, c, h, w = x.shape
        tokens = np.ascontiguousarray(x.transpose(0, 2, 3, 1)).reshape(n, h * w, c)
        self._cache = (tokens, x.shape)
        out_blocks = tokens @ self.weight.reshape(self.in_channels, -1)
        y = _blocks_to_space(out_blocks, n, self.out_channels, 2 * h, 2 * w)
        return y + self.bias[None, :, None, None]

    def backward(self, grad_out):
        tokens, (n, c, h, w) = self._cache
        self.grads["bias"] += grad_out.sum(axis=(0, 2, 3))
        gblocks = _space_to_blocks(grad_out)
        self.grads["weight"] += np.tensordot(tokens, gblocks, axes=([0, 1], [0, 1])).reshape(
            self.weight.shape
        )
        gtokens = gblocks @ self.weight.reshape(self.in_channels, -1).T
        return np.ascontiguousarray(gtokens.reshape(n, h, w, c).transpose(0, 3, 1, 2))
