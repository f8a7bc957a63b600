"""Hand-written numeric kernels with explicit forward/backward pairs."""

from .attention import SCBlock, WindowAttention
from .cfa_ops import CfaAttention, CfaConv, CfaPool, cfa_pool, cfa_pool_backward
from .gradcheck import GradCheckResult, grad_check
from .module import Module, Sequential
from .ops import (
    Conv2d,
    Downsample2,
    FullyConnected,
    PReLU,
    ResidualConv,
    ResidualGroup,
    Upsample2,
    col2im,
    im2col,
    pad2d,
    pad2d_adjoint,
)
from .snapshot import decode_tensor, encode_tensor, read_tensor, write_tensor
from .wavelet import HaarDWT, HaarIWT, haar_dwt, haar_iwt

__all__ = [
    "Module",
    "Sequential",
    "Conv2d",
    "PReLU",
    "FullyConnected",
    "ResidualConv",
    "ResidualGroup",
    "Downsample2",
    "Upsample2",
    "CfaConv",
    "CfaPool",
    "CfaAttention",
    "cfa_pool",
    "cfa_pool_backward",
    "WindowAttention",
    "SCBlock",
    "HaarDWT",
    "HaarIWT",
    "haar_dwt",
    "haar_iwt",
    "grad_check",
    "GradCheckResult",
    "im2col",
    "col2im",
    "pad2d",
    "pad2d_adjoint",
    "encode_tensor",
    "decode_tensor",
    "read_tensor",
    "write_tensor",
]
