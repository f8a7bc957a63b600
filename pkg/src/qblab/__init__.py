"""Quad Bayer ISP laboratory."""

__version__ = "0.1.0"

from .cfa import (
    BAYER,
    QUAD,
    PATTERNS,
    CfaPattern,
    FrequencyStructureMatrix,
    MosaicImage,
    RgbImage,
    bilinear_demosaic,
    bin2x2,
    fsm,
    mosaic,
    quad_to_bayer_swap,
    relative_position,
)
from .errors import DataError, NumericError, QblabError, UsageError
from .noise import NoiseParams, add_noise

__all__ = [
    "BAYER",
    "QUAD",
    "PATTERNS",
    "CfaPattern",
    "FrequencyStructureMatrix",
    "MosaicImage",
    "RgbImage",
    "NoiseParams",
    "add_noise",
    "bilinear_demosaic",
    "bin2x2",
    "fsm",
    "mosaic",
    "quad_to_bayer_swap",
    "relative_position",
    "DataError",
    "NumericError",
    "QblabError",
    "UsageError",
    "__version__",
]
