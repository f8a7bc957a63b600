"""Kernels that know about the 4x4 Quad Bayer phase grid.

cfa_conv selects one of 16 kernel banks by the phase of the OUTPUT
pixel, (i mod 4, j mod 4).  cfa_pool averages all sites that share a
phase, collapsing (H, W) to the 4x4 phase grid.  cfa_attention squeezes
the input through that pooled grid and re-expands a sigmoid gate
periodically over the full plane.
"""

from __future__ import annotations

import numpy as np

from .module import Module
from .ops import Conv2d, FullyConnected, ResidualConv, col2im, fan_init, im2col

PERIOD = 4


def _check_phase_dims(h: int, w: int) -> None:
    if h % PERIOD or w % PERIOD:
        raise ValueError("spatial dims must be multiples of the 4x4 CFA period")


class CfaConv(Module):
    """Phase-indexed convolution: 16 banks, one per output-pixel phase."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int = 3,
        pad_mode: str = "zero",
        rng=None,
        dtype=np.float32,
    ):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.pad_mode = pad_mode
        fan_in = in_channels * kernel_size * kernel_size
        self.add_param(
            "banks",
            fan_init(rng, (PERIOD, PERIOD, out_channels, in_channels, kernel_size, kernel_size), fan_in, dtype),
        )
        self.add_param("bias", np.zeros(out_channels, dtype=dtype))

    def forward(self, x):
        n, c, h, w = x.shape
        _check_phase_dims(h, w)
        cols, geom = im2col(x, self.kernel_size, 1, self.kernel_size // 2, self.pad_mode)
        out = np.empty((n, self.out_channels, h, w), dtype=x.dtype)
        for a in range(PERIOD):
            for b in range(PERIOD):
                sub = cols[:, a::PERIOD, b::PERIOD, :]
                wf = self.banks[a, b].reshape(self.out_channels, -1)
                out[:, :, a::PERIOD, b::PERIOD] = (sub @ wf.T).transpose(0, 3, 1, 2)
        out += self.bias[None, :, None, None]
        self._cache = (cols, geom)
        return out

    def backward(self, grad_out):
        cols, geom = self._cache
        self.grads["bias"] += grad_out.sum(axis=(0, 2, 3))
        gcols = np.zeros_like(cols)
        for a in range(PERIOD):
            for b in range(PERIOD):
                gsub = grad_out[:, :, a::PERIOD, b::PERIOD].transpose(0, 2, 3, 1)
                sub = cols[:, a::PERIOD, b::PERIOD, :]
                gw = np.tensordot(gsub, sub, axes=([0, 1, 2], [0, 1, 2]))
                self.grads["banks"][a, b] += gw.reshape(self.banks[a, b].shape)
                gcols[:, a::PERIOD, b::PERIOD, :] = gsub @ self.banks[a, b].reshape(
                    self.out_channels, -1
                )
        return col2im(gcols, geom)


def cfa_pool(x: np.ndarray) -> np.ndarray:
    """Mean over every site of each phase: (N, C, H, W) -> (N, C, 4, 4)."""
    n, c, h, w = x.shape
    _check_phase_dims(h, w)
    return x.reshape(n, c, h // PERIOD, PERIOD, w // PERIOD, PERIOD).mean(axis=(2, 4))


def cfa_pool_backward(grad_out: np.ndarray, h: int, w: int) -> np.ndarray:
    """Adjoint: each phase site receives grad / ((H/4)*(W/4))."""
    scale = grad_out.dtype.type(1.0 / ((h // PERIOD) * (w // PERIOD)))
    return np.tile(grad_out, (1, 1, h // PERIOD, w // PERIOD)) * scale


class CfaPool(Module):
    def forward(self, x):
        self._cache = x.shape
        return cfa_pool(x)

    def backward(self, grad_out):
        _, _, h, w = self._cache
        return cfa_pool_backward(grad_out, h, w)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class CfaAttention(Module):
    """Phase-pooled gate: pool -> RConv x2 -> FC -> Conv3x3 -> sigmoid,
    tiled periodically and applied multiplicatively to the input."""

    def __init__(self, channels: int, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.channels = channels
        self.add_child("rconv1", ResidualConv(channels, 3, rng=rng, dtype=dtype))
        self.add_child("rconv2", ResidualConv(channels, 3, rng=rng, dtype=dtype))
        self.add_child("fc", FullyConnected(channels, channels, rng=rng, dtype=dtype))
        self.add_child("conv", Conv2d(channels, channels, 3, rng=rng, dtype=dtype))

    def forward(self, x):
        n, c, h, w = x.shape
        pooled = cfa_pool(x)
        a = self.rconv2(self.rconv1(pooled))
        a = self.fc(a.transpose(0, 2, 3, 1))  # mix channels at each phase site
        a = self.conv(np.ascontiguousarray(a.transpose(0, 3, 1, 2)))
        gate = _sigmoid(a)
        tiled = np.tile(gate, (1, 1, h // PERIOD, w // PERIOD))
        self._cache = (x, gate, tiled)
        return x * tiled

    def backward(self, grad_out):
        x, gate, tiled = self._cache
        n, c, h, w = x.shape
        gx = grad_out * tiled
        ggate = (grad_out * x).reshape(n, c, h // PERIOD, PERIOD, w // PERIOD, PERIOD).sum(
            axis=(2, 4)
        )
        ga = ggate * gate * (1.0 - gate)
        ga = self.conv.backward(ga)
        ga = self.fc.backward(np.ascontiguousarray(ga.transpose(0, 2, 3, 1)))
        ga = self.rconv1.backward(
            self.rconv2.backward(np.ascontiguousarray(ga.transpose(0, 3, 1, 2)))
        )
        return gx + cfa_pool_backward(ga, h, w)
