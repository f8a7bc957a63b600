"""Sensor noise injection for raw mosaics.

The model is signal-dependent Gaussian: an analog gain g = 10^(dB/20)
scales both a signal-independent read component and a shot component
whose variance grows linearly with the clean signal,

    noisy = clamp(clean + n_read + n_shot)
    n_read ~ N(0, (g * read_sigma_base)^2)
    n_shot ~ N(0,  g * shot_scale_base * clean)    (variance, per site)

Clamping is to the mosaic's [black_level, white_level] range.  All
randomness comes from one 64-bit seed, so a fixed seed reproduces the
noisy mosaic bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cfa import MosaicImage


@dataclass(frozen=True)
class NoiseParams:
    """Gain in dB plus base noise scales at unit gain."""

    gain_db: float = 0.0
    read_sigma_base: float = 0.005
    shot_scale_base: float = 0.0005
    seed: int = 0

    def __post_init__(self):
        if self.read_sigma_base < 0 or self.shot_scale_base < 0:
            raise ValueError("noise scales must be non-negative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def gain(self) -> float:
        return float(10.0 ** (self.gain_db / 20.0))


def add_noise(clean: MosaicImage, params: NoiseParams) -> MosaicImage:
    """Apply gain-scaled read + shot noise and clamp to the value range."""
    g = params.gain
    rng = np.random.default_rng(int(params.seed))
    x = clean.samples.astype(np.float64)
    # shot variance is proportional to the clean signal; negative signal
    # values (below black) would need a clamp, but the mosaic contract
    # already guarantees clean >= black_level and we only ever simulate
    # with black_level <= 0 <= clean.
    shot_var = np.maximum(g * params.shot_scale_base * x, 0.0)
    noisy = (
        x
        + rng.normal(0.0, g * params.read_sigma_base, size=x.shape)
        + rng.standard_normal(x.shape) * np.sqrt(shot_var)
    )
    np.clip(noisy, clean.black_level, clean.white_level, out=noisy)
    return MosaicImage(
        noisy.astype(np.float32), clean.pattern, clean.black_level, clean.white_level
    )
