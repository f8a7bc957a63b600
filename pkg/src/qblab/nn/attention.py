"""Window self-attention and the split attention/conv block.

Windows are non-overlapping w x w tiles (no shift, no relative bias);
attention is standard multi-head scaled dot product within each window.
The SC block splits channels in half, routes one half through window
attention and the other through a two-layer residual convolution, then
fuses with a 1x1 conv inside an outer residual connection.
"""

from __future__ import annotations

import numpy as np

from .module import Module
from .ops import RESIDUAL_DAMP, Conv2d, PReLU, fan_init


def _softmax_last(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=-1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=-1, keepdims=True)


class WindowAttention(Module):
    """Multi-head self-attention inside non-overlapping windows."""

    def __init__(self, channels: int, window: int, heads: int = 2, rng=None, dtype=np.float32):
        super().__init__()
        if channels % heads:
            raise ValueError("heads must divide channels")
        rng = rng or np.random.default_rng(0)
        self.channels = channels
        self.window = window
        self.heads = heads
        self.add_param("qkv_w", fan_init(rng, (3 * channels, channels), channels, dtype))
        self.add_param("qkv_b", np.zeros(3 * channels, dtype=dtype))
        self.add_param("out_w", fan_init(rng, (channels, channels), channels, dtype))
        self.add_param("out_b", np.zeros(channels, dtype=dtype))

    # -- window (de)partitioning ---------------------------------------

    def _to_tokens(self, x):
        n, c, h, w = x.shape
        ww = self.window
        t = x.reshape(n, c, h // ww, ww, w // ww, ww).transpose(0, 2, 4, 3, 5, 1)
        return np.ascontiguousarray(t).reshape(-1, ww * ww, c)

    def _from_tokens(self, tokens, shape):
        n, c, h, w = shape
        ww = self.window
        t = tokens.reshape(n, h // ww, w // ww, ww, ww, c).transpose(0, 5, 1, 3, 2, 4)
        return np.ascontiguousarray(t).reshape(n, c, h, w)

    def _split_heads(self, t):
        b, tt, c = t.shape
        return np.ascontiguousarray(
            t.reshape(b, tt, self.heads, c // self.heads).transpose(0, 2, 1, 3)
        )

    def _merge_heads(self, t):
        b, h, tt, dh = t.shape
        return np.ascontiguousarray(t.transpose(0, 2, 1, 3)).reshape(b, tt, h * dh)

    # -- forward / backward --------------------------------------------

    def forward(self, x):
        n, c, h, w = x.shape
        if h % self.window or w % self.window:
            raise ValueError("spatial dims must be multiples of the window size")
        tokens = self._to_tokens(x)
        qkv = tokens @ self.qkv_w.T + self.qkv_b
        q, k, v = (self._split_heads(a) for a in np.split(qkv, 3, axis=-1))
        scale = 1.0 / np.sqrt(q.shape[-1])
        scores = (q @ k.transpose(0, 1, 3, 2)) * scale
        attn = _softmax_last(scores)
        ctx = attn @ v
        merged = self._merge_heads(ctx)
        out_tokens = merged @ self.out_w.T + self.out_b
        self._cache = (x.shape, tokens, q, k, v, attn, merged, scale)
        return self._from_tokens(out_tokens, x.shape)

    def backward(self, grad_out):
        shape, tokens, q, k, v, attn, merged, scale = self._cache
        g_tokens_out = self._to_tokens(grad_out)
        flat_g = g_tokens_out.reshape(-1, self.channels)
        self.grads["out_w"] += flat_g.T @ merged.reshape(-1, self.channels)
        self.grads["out_b"] += flat_g.sum(axis=0)
        g_merged = g_tokens_out @ self.out_w
        g_ctx = self._split_heads(g_merged)
        g_attn = g_ctx @ v.transpose(0, 1, 3, 2)
        g_v = attn.transpose(0, 1, 3, 2) @ g_ctx
        # softmax jacobian contracted with upstream gradient
        g_scores = attn * (g_attn - (g_attn * attn).sum(axis=-1, keepdims=True))
        g_scores *= scale
        g_q = g_scores @ k
        g_k = g_scores.transpose(0, 1, 3, 2) @ q
        g_qkv = np.concatenate(
            [self._merge_heads(g) for g in (g_q, g_k, g_v)], axis=-1
        )
        flat_gqkv = g_qkv.reshape(-1, 3 * self.channels)
        self.grads["qkv_w"] += flat_gqkv.T @ tokens.reshape(-1, self.channels)
        self.grads["qkv_b"] += flat_gqkv.sum(axis=0)
        g_tokens = g_qkv @ self.qkv_w
        return self._from_tokens(g_tokens, shape)


class SCBlock(Module):
    """Split block: window attention on one channel half, a 2-layer
    residual convolution on the other, 1x1 fusion, outer residual."""

    def __init__(self, channels: int, window: int, heads: int = 2, rng=None, dtype=np.float32):
        super().__init__()
        if channels % 2:
            raise ValueError("SC block needs an even channel count")
        rng = rng or np.random.default_rng(0)
        self.channels = channels
        half = channels // 2
        self.add_child("attn", WindowAttention(half, window, heads, rng=rng, dtype=dtype))
        self.add_child("conv1", Conv2d(half, half, 3, rng=rng, dtype=dtype))
        self.add_child("act", PReLU(dtype=dtype))
        self.add_child("conv2", Conv2d(half, half, 3, rng=rng, dtype=dtype))
        self.add_child("fuse", Conv2d(channels, channels, 1, rng=rng, dtype=dtype))
        self.fuse.weight *= RESIDUAL_DAMP

    def forward(self, x):
        half = self.channels // 2
        x1, x2 = x[:, :half], x[:, half:]
        y1 = self.attn(x1)
        y2 = x2 + self.conv2(self.act(self.conv1(x2)))
        return x + self.fuse(np.concatenate([y1, y2], axis=1))

    def backward(self, grad_out):
        half = self.channels // 2
        gz = self.fuse.backward(grad_out)
        g1 = self.attn.backward(gz[:, :half])
        g2 = gz[:, half:] + self.conv1.backward(self.act.backward(self.conv2.backward(gz[:, half:])))
        return grad_out + np.concatenate([g1, g2], axis=1)
