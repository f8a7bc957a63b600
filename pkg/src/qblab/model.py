"""Dual-head remosaic + denoise network at toy scale.

Two branches read the same noisy Quad Bayer plane and each emit a full
resolution Bayer estimate:

* ``BranchDnRm`` denoises first (a 3-level UNet of window-attention /
  convolution split blocks) and remosaics last with a QB-Re block.
* ``BranchRmDn`` remosaics first and denoises in the wavelet domain
  (cascaded Haar analysis with 1x1 channel compression, two residual
  groups at the bottleneck, mirrored synthesis with additive skips).

The heads are merged either by a learnable 1x1 fusion over the stacked
pair ("fuse", default) or by a plain average ("mean").  Everything is
built from the explicit-backprop kernels in :mod:`qblab.nn`; the whole
network is one big Module, so gradient flow is checkable end to end.

Checkpoints are a single file: magic, the JSON-encoded config (so the
file is self-describing), a SHA-256 digest, then every learnable tensor
keyed by its module path in the binary snapshot format.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .cfa import BAYER, MosaicImage
from .errors import DataError, NumericError
from .imgio import atomic_write_bytes
from .nn import (
    CfaAttention,
    CfaConv,
    Conv2d,
    Downsample2,
    HaarDWT,
    HaarIWT,
    Module,
    PReLU,
    ResidualConv,
    ResidualGroup,
    SCBlock,
    Sequential,
    Upsample2,
    decode_tensor,
    encode_tensor,
)

CHECKPOINT_MAGIC = b"QBCKPT01"
_UNET_STAGES = 3  # the attention branch always downsamples 8x


@dataclass(frozen=True)
class ModelConfig:
    """Architecture knobs.  Defaults are the desk-trainable toy scale;
    ca_stack_depth at full scale would be 10."""

    base_channels: int = 16
    ca_stack_depth: int = 2
    n1: int = 1
    n2: int = 1
    dwt_levels: int = 3
    window_size: int = 8
    kernel_size: int = 3
    aggregation_mode: str = "fuse"
    attn_heads: int = 2

    def __post_init__(self):
        for field in ("ca_stack_depth", "n1", "n2", "dwt_levels", "window_size"):
            if getattr(self, field) < 1:
                raise ValueError(f"{field} must be >= 1")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        if self.aggregation_mode not in ("fuse", "mean"):
            raise ValueError("aggregation_mode must be 'fuse' or 'mean'")
        # the split block halves channels, attention splits them again
        if self.base_channels % (2 * self.attn_heads):
            raise ValueError("base_channels must be divisible by 2*attn_heads")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"bad checkpoint config: {exc}") from exc
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise DataError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**raw)
        except (TypeError, ValueError) as exc:
            raise DataError(f"bad checkpoint config: {exc}") from exc

    def min_multiple(self) -> int:
        """Smallest value that must divide both spatial dims."""
        return max(2**_UNET_STAGES * self.window_size, 2**self.dwt_levels)


class QBReBlock(Module):
    """Remosaicing unit: phase-indexed conv into a stack of CFA attention
    plus residual conv pairs, closed by a plain conv back to one plane."""

    def __init__(self, cfg: ModelConfig, rng, dtype=np.float32):
        super().__init__()
        c, k = cfg.base_channels, cfg.kernel_size
        layers: list[Module] = [CfaConv(1, c, k, rng=rng, dtype=dtype)]
        for _ in range(cfg.ca_stack_depth):
            layers.append(CfaAttention(c, rng=rng, dtype=dtype))
            layers.append(ResidualConv(c, k, rng=rng, dtype=dtype))
            layers.append(ResidualConv(c, k, rng=rng, dtype=dtype))
        layers.append(Conv2d(c, 1, k, rng=rng, dtype=dtype))
        self.add_child("stack", Sequential(*layers))

    def forward(self, x):
        return self.stack(x)

    def backward(self, grad_out):
        return self.stack.backward(grad_out)


class BranchDnRm(Module):
    """Denoise-then-remosaic head: UNet over split attention/conv blocks,
    three 2x downsamplings, additive encoder skips, QB-Re at the end."""

    def __init__(self, cfg: ModelConfig, rng, dtype=np.float32):
        super().__init__()
        c, k, win, heads = cfg.base_channels, cfg.kernel_size, cfg.window_size, cfg.attn_heads
        self.add_child("lift", Conv2d(1, c, k, rng=rng, dtype=dtype))
        self.enc, self.down, self.up, self.dec = [], [], [], []
        for i in range(_UNET_STAGES):
            ci = c * 2**i
            self.enc.append(
                self.add_child(
                    f"enc{i}",
                    Sequential(*[SCBlock(ci, win, heads, rng=rng, dtype=dtype) for _ in range(cfg.n1)]),
                )
            )
            self.down.append(self.add_child(f"down{i}", Downsample2(ci, 2 * ci, rng=rng, dtype=dtype)))
            self.up.append(self.add_child(f"up{i}", Upsample2(2 * ci, ci, rng=rng, dtype=dtype)))
            self.dec.append(
                self.add_child(
                    f"dec{i}",
                    Sequential(*[SCBlock(ci, win, heads, rng=rng, dtype=dtype) for _ in range(cfg.n1)]),
                )
            )
        cb = c * 2**_UNET_STAGES
        self.add_child(
            "mid", Sequential(*[SCBlock(cb, win, heads, rng=rng, dtype=dtype) for _ in range(cfg.n2)])
        )
        self.add_child("head", Conv2d(c, 1, k, rng=rng, dtype=dtype))
        self.add_child("qbre", QBReBlock(cfg, rng, dtype))

    def forward(self, x):
        y = self.lift(x)
        skips = []
        for i in range(_UNET_STAGES):
            y = self.enc[i](y)
            skips.append(y)
            y = self.down[i](y)
        y = self.mid(y)
        for i in reversed(range(_UNET_STAGES)):
            y = self.up[i](y) + skips[i]
            y = self.dec[i](y)
        return self.qbre(self.head(y))

    def backward(self, grad_out):
        g = self.head.backward(self.qbre.backward(grad_out))
        skip_grads = [None] * _UNET_STAGES
        for i in range(_UNET_STAGES):
            g = self.dec[i].backward(g)
            skip_grads[i] = g  # the add node routes this to the encoder too
            g = self.up[i].backward(g)
        g = self.mid.backward(g)
        for i in reversed(range(_UNET_STAGES)):
            g = self.down[i].backward(g)
            g = self.enc[i].backward(g + skip_grads[i])
        return self.lift.backward(g)


class BranchRmDn(Module):
    """Remosaic-then-denoise head: QB-Re first, then a Haar pyramid with
    1x1 compression per analysis level, two residual groups at the
    bottleneck, and the mirrored synthesis path with additive skips."""

    def __init__(self, cfg: ModelConfig, rng, dtype=np.float32):
        super().__init__()
        c, k, levels = cfg.base_channels, cfg.kernel_size, cfg.dwt_levels
        self.levels = levels
        self.add_child("qbre", QBReBlock(cfg, rng, dtype))
        self.add_child("lift", Conv2d(1, c, k, rng=rng, dtype=dtype))
        self.dwt, self.comp, self.comp_act = [], [], []
        self.expand, self.expand_act, self.iwt = [], [], []
        for i in range(levels):
            ci = c * 2**i
            self.dwt.append(self.add_child(f"dwt{i}", HaarDWT()))
            # Haar quadruples channels; compress back to 2x so the
            # bottleneck lands on the documented base * 2^levels width
            self.comp.append(self.add_child(f"comp{i}", Conv2d(4 * ci, 2 * ci, 1, rng=rng, dtype=dtype)))
            self.comp_act.append(self.add_child(f"comp_act{i}", PReLU(dtype=dtype)))
            self.expand.append(self.add_child(f"expand{i}", Conv2d(2 * ci, 4 * ci, 1, rng=rng, dtype=dtype)))
            self.expand_act.append(self.add_child(f"expand_act{i}", PReLU(dtype=dtype)))
            self.iwt.append(self.add_child(f"iwt{i}", HaarIWT()))
        cb = c * 2**levels
        self.add_child("rg1", ResidualGroup(cb, rng=rng, dtype=dtype))
        self.add_child("rg2", ResidualGroup(cb, rng=rng, dtype=dtype))
        self.add_child("head", Conv2d(c, 1, k, rng=rng, dtype=dtype))
        self.add_child("head_act", PReLU(dtype=dtype))

    def forward(self, x):
        y = self.lift(self.qbre(x))
        skips = []
        for i in range(self.levels):
            skips.append(y)
            y = self.comp_act[i](self.comp[i](self.dwt[i](y)))
        y = self.rg2(self.rg1(y))
        for i in reversed(range(self.levels)):
            y = self.iwt[i](self.expand_act[i](self.expand[i](y)))
            y = y + skips[i]
        return self.head_act(self.head(y))

    def backward(self, grad_out):
        g = self.head.backward(self.head_act.backward(grad_out))
        skip_grads = [None] * self.levels
        for i in range(self.levels):
            skip_grads[i] = g
            g = self.expand[i].backward(self.expand_act[i].backward(self.iwt[i].backward(g)))
        g = self.rg1.backward(self.rg2.backward(g))
        for i in reversed(range(self.levels)):
            g = self.dwt[i].backward(self.comp[i].backward(self.comp_act[i].backward(g)))
            g = g + skip_grads[i]
        return self.qbre.backward(self.lift.backward(g))


class DualHeadNet(Module):
    """Both branches plus the aggregation head, operating on mosaics."""

    def __init__(self, cfg: ModelConfig | None = None, seed: int = 0, dtype=np.float32):
        super().__init__()
        self.cfg = cfg or ModelConfig()
        rng = np.random.default_rng(seed)
        self.add_child("branch_x", BranchRmDn(self.cfg, rng, dtype))
        self.add_child("branch_y", BranchDnRm(self.cfg, rng, dtype))
        if self.cfg.aggregation_mode == "fuse":
            fuse = Conv2d(2, 1, 1, rng=rng, dtype=dtype)
            # start at the mean so "fuse" degrades gracefully to it
            fuse.weight[...] = 0.5
            fuse.bias[...] = 0.0
            self.add_child("fuse", fuse)

    # -- plane-level interface (training operates here) -----------------

    def forward_planes(self, x: np.ndarray) -> np.ndarray:
        """(N, 1, H, W) noisy quad plane -> (N, 1, H, W) Bayer estimate."""
        self._validate_dims(x.shape[2], x.shape[3])
        xo = self.branch_x(x)
        yo = self.branch_y(x)
        if self.cfg.aggregation_mode == "fuse":
            return self.fuse(np.concatenate([xo, yo], axis=1))
        return (xo + yo) * np.asarray(0.5, dtype=x.dtype)

    def backward(self, grad_out):
        if self.cfg.aggregation_mode == "fuse":
            g = self.fuse.backward(grad_out)
            gx, gy = g[:, :1], g[:, 1:]
        else:
            gx = gy = grad_out * np.asarray(0.5, dtype=grad_out.dtype)
        return self.branch_x.backward(gx) + self.branch_y.backward(gy)

    # -- mosaic-level interface ------------------------------------------

    def forward(self, m):
        if isinstance(m, np.ndarray):
            return self.forward_planes(m)
        if m.pattern.name != "quad":
            raise DataError(f"model expects a quad mosaic, got {m.pattern.name!r}")
        plane = m.samples.astype(np.float32)[None, None]
        out = self.forward_planes(plane)[0, 0]
        return MosaicImage(out, BAYER, m.black_level, m.white_level)

    def _validate_dims(self, h: int, w: int) -> None:
        mult = self.cfg.min_multiple()
        if h % mult or w % mult:
            raise DataError(
                f"spatial dims ({h}, {w}) must be multiples of {mult} "
                f"(window {self.cfg.window_size} across {_UNET_STAGES} "
                f"halvings, {self.cfg.dwt_levels} wavelet levels)"
            )

    def state(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.named_params().items()}


# -- checkpoint io -------------------------------------------------------


def save_state(model: DualHeadNet, path: str | Path) -> None:
    params = model.named_params()
    body = bytearray()
    for key in sorted(params):
        arr = params[key]
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite values in tensor {key!r}")
        kb = key.encode("utf-8")
        body += struct.pack("<Q", len(kb)) + kb + encode_tensor(arr)
    cfg_bytes = model.cfg.to_json().encode("utf-8")
    digest = hashlib.sha256(cfg_bytes + bytes(body)).digest()
    blob = (
        CHECKPOINT_MAGIC
        + struct.pack("<Q", len(cfg_bytes))
        + cfg_bytes
        + digest
        + bytes(body)
    )
    atomic_write_bytes(path, blob)


def load_state(path: str | Path) -> DualHeadNet:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing checkpoint {path}")
    buf = path.read_bytes()
    if buf[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise DataError(f"{path} is not a model checkpoint (bad magic)")
    off = len(CHECKPOINT_MAGIC)
    try:
        (cfg_len,) = struct.unpack_from("<Q", buf, off)
        off += 8
        cfg_bytes = buf[off : off + cfg_len]
        if len(cfg_bytes) != cfg_len:
            raise DataError(f"{path}: truncated checkpoint config")
        off += cfg_len
        digest = buf[off : off + 32]
        off += 32
        body = buf[off:]
        if hashlib.sha256(cfg_bytes + body).digest() != digest:
            raise DataError(f"{path}: checkpoint digest mismatch (corrupt file)")
        tensors: dict[str, np.ndarray] = {}
        pos = 0
        while pos < len(body):
            (klen,) = struct.unpack_from("<Q", body, pos)
            pos += 8
            key = body[pos : pos + klen].decode("utf-8")
            pos += klen
            arr, pos = decode_tensor(body, pos)
            tensors[key] = arr
    except (struct.error, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: truncated checkpoint: {exc}") from exc
    cfg = ModelConfig.from_json(cfg_bytes.decode("utf-8"))
    model = DualHeadNet(cfg)
    try:
        model.load_tensors(tensors)
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: checkpoint does not match its config: {exc}") from exc
    return model
