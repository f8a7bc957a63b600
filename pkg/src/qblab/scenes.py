"""Synthetic RGB scenes and artifact injectors for toy corpora.

Scenes are sums of a few low-frequency sinusoidal bands over a random
base color, smooth enough that remosaicing them is learnable at toy
scale.  The injectors write the two artifact families the patch miner is
supposed to catch: low-frequency color banding (a stand-in for Moire)
and single-pixel on/off alternation along a strip (zippering).
"""

from __future__ import annotations

import numpy as np

from .cfa import BAYER, QUAD, RgbImage, mosaic
from .noise import NoiseParams, add_noise


def make_scene(seed: int, height: int = 64, width: int = 64) -> np.ndarray:
    """Smooth random (H, W, 3) image with values inside (0, 1)."""
    rng = np.random.default_rng(seed)
    i, j = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    img = np.empty((height, width, 3), dtype=np.float64)
    for ch in range(3):
        plane = np.full((height, width), rng.uniform(0.3, 0.7))
        for _ in range(3):
            cycles = rng.uniform(0.5, 2.5)
            angle = rng.uniform(0.0, np.pi)
            phase = rng.uniform(0.0, 2 * np.pi)
            freq = 2 * np.pi * cycles / max(height, width)
            carrier = freq * (np.cos(angle) * i + np.sin(angle) * j) + phase
            plane = plane + rng.uniform(0.04, 0.1) * np.sin(carrier)
        img[:, :, ch] = plane
    return np.clip(img, 0.02, 0.98).astype(np.float32)


def inject_banding(img: np.ndarray, row: int, col: int, size: int, amplitude: float = 0.15, cycles: float = 4.0) -> np.ndarray:
    """Low-frequency opposing color bands inside one square region."""
    out = img.astype(np.float32).copy()
    i = np.arange(size)[:, None] + np.zeros((1, size))
    wave = np.sin(2 * np.pi * cycles * i / size).astype(np.float32)
    region = out[row : row + size, col : col + size]
    region[:, :, 0] += amplitude * wave
    region[:, :, 2] -= amplitude * wave
    return np.clip(out, 0.0, 1.0)


def inject_zipper(img: np.ndarray, row: int, col: int, size: int, amplitude: float = 0.15) -> np.ndarray:
    """Single-pixel on/off alternation along rows inside one region."""
    out = img.astype(np.float32).copy()
    j = np.zeros((size, 1)) + np.arange(size)[None, :]
    comb = ((-1.0) ** j).astype(np.float32)
    out[row : row + size, col : col + size] += amplitude * comb[:, :, None]
    return np.clip(out, 0.0, 1.0)


def capture_pair(
    rgb: np.ndarray,
    noise_db: float = 24.0,
    seed: int = 0,
    read_sigma: float = 0.005,
    shot_scale: float = 0.0005,
) -> tuple[np.ndarray, np.ndarray]:
    """(noisy quad plane, clean Bayer plane) for one scene."""
    wrapped = RgbImage(rgb)
    noisy = add_noise(
        mosaic(wrapped, QUAD),
        NoiseParams(noise_db, read_sigma, shot_scale, seed=seed),
    )
    clean = mosaic(wrapped, BAYER)
    return noisy.samples, clean.samples


def training_corpus(
    n_images: int,
    size: int = 64,
    noise_db: float = 24.0,
    seed: int = 0,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Paired toy corpus of n smooth scenes at one gain level."""
    rng = np.random.default_rng(seed)
    corpus = []
    for k in range(n_images):
        scene = make_scene(int(rng.integers(2**63)), size, size)
        corpus.append(capture_pair(scene, noise_db, seed=int(rng.integers(2**63))))
    return corpus
