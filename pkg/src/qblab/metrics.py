"""Quality metrics: PSNR, windowed SSIM, and a mosaic-domain KLD.

KLD is computed per CFA phase plane: each (row mod P, col mod Q) class
gets its own intensity histogram over [black, white], smoothed by a tiny
per-bin mass before renormalization, and the divergences are averaged
over the phases.  This respects the mosaic structure being evaluated
instead of pooling physically different color sites into one histogram.
"""

from __future__ import annotations

import numpy as np

from .cfa import MosaicImage

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE); identical inputs give +inf."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"psnr shape mismatch: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def _window_means(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Valid-region windowed means via separable correlation."""
    k = kernel.shape[0]
    win = np.lib.stride_tricks.sliding_window_view(plane, (k, k))
    return np.tensordot(win, kernel, axes=([2, 3], [0, 1]))


def ssim(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Mean structural similarity, 11x11 Gaussian window, sigma 1.5."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"ssim shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    if a.shape[0] < _SSIM_WINDOW or a.shape[1] < _SSIM_WINDOW:
        raise ValueError(f"ssim needs at least {_SSIM_WINDOW}x{_SSIM_WINDOW} images")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    kernel = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    vals = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        mx = _window_means(x, kernel)
        my = _window_means(y, kernel)
        vx = _window_means(x * x, kernel) - mx * mx
        vy = _window_means(y * y, kernel) - my * my
        cov = _window_means(x * y, kernel) - mx * my
        num = (2 * mx * my + c1) * (2 * cov + c2)
        den = (mx * mx + my * my + c1) * (vx + vy + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


def kld(a: MosaicImage, b: MosaicImage, bins: int = 256, eps: float = 1e-10) -> float:
    """Mean per-phase KL divergence of intensity histograms, natural log."""
    if a.pattern.name != b.pattern.name:
        raise ValueError(f"pattern mismatch: {a.pattern.name} vs {b.pattern.name}")
    if a.samples.shape != b.samples.shape:
        raise ValueError(f"kld shape mismatch: {a.samples.shape} vs {b.samples.shape}")
    if (a.black_level, a.white_level) != (b.black_level, b.white_level):
        raise ValueError("kld inputs must share black/white levels")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    span = (a.black_level, a.white_level)
    total = 0.0
    count = 0
    for i in range(a.pattern.period_rows):
        for j in range(a.pattern.period_cols):
            pa = a.samples[i :: a.pattern.period_rows, j :: a.pattern.period_cols]
            pb = b.samples[i :: b.pattern.period_rows, j :: b.pattern.period_cols]
            p = _smoothed_hist(pa, bins, span, eps)
            q = _smoothed_hist(pb, bins, span, eps)
            total += float(np.sum(p * np.log(p / q)))
            count += 1
    return total / count


def _smoothed_hist(values: np.ndarray, bins: int, span, eps: float) -> np.ndarray:
    counts, _ = np.histogram(values, bins=bins, range=span)
    mass = counts / max(1, values.size) + eps
    return mass / mass.sum()
