"""Orthonormal 2D Haar transform, exact inverse, channel-stacked bands.

One level maps (N, C, H, W) to (N, 4C, H/2, W/2) with the subbands
stacked channel-major as [LL | LH | HL | HH].  All four analysis vectors
have unit norm, so the transform is orthogonal: the inverse IS the
adjoint, which makes the backward passes trivial.
"""

from __future__ import annotations

import numpy as np

from .module import Module


def haar_dwt(x: np.ndarray) -> np.ndarray:
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError("Haar DWT needs even spatial dims")
    a = x[:, :, 0::2, 0::2]
    b = x[:, :, 0::2, 1::2]
    cc = x[:, :, 1::2, 0::2]
    d = x[:, :, 1::2, 1::2]
    ll = (a + b + cc + d) * 0.5
    lh = (-a - b + cc + d) * 0.5
    hl = (-a + b - cc + d) * 0.5
    hh = (a - b - cc + d) * 0.5
    return np.concatenate([ll, lh, hl, hh], axis=1)


def haar_iwt(y: np.ndarray) -> np.ndarray:
    n, c4, hh_, ww = y.shape
    if c4 % 4:
        raise ValueError("Haar IWT needs a channel count divisible by 4")
    c = c4 // 4
    ll, lh, hl, hh = y[:, :c], y[:, c : 2 * c], y[:, 2 * c : 3 * c], y[:, 3 * c :]
    x = np.empty((n, c, hh_ * 2, ww * 2), dtype=y.dtype)
    x[:, :, 0::2, 0::2] = (ll - lh - hl + hh) * 0.5
    x[:, :, 0::2, 1::2] = (ll - lh + hl - hh) * 0.5
    x[:, :, 1::2, 0::2] = (ll + lh - hl - hh) * 0.5
    x[:, :, 1::2, 1::2] = (ll + lh + hl + hh) * 0.5
    return x


class HaarDWT(Module):
    def forward(self, x):
        return haar_dwt(x)

    def backward(self, grad_out):
        # orthogonal map: adjoint equals inverse
        return haar_iwt(grad_out)


class HaarIWT(Module):
    def forward(self, x):
        return haar_iwt(x)

    def backward(self, grad_out):
        return haar_dwt(grad_out)
