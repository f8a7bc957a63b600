"""Color filter array geometry, mosaicing and frequency-structure analysis.

Conventions used throughout the package:

* the canonical Bayer pattern is GRBG, i.e. the 2x2 cell

      G R
      B G

* the Quad Bayer pattern is the same cell pixel-doubled to a 4x4 period,
  so every aligned 2x2 cell carries a single color:

      G G R R
      G G R R
      B B G G
      B B G G

* the frequency structure matrix (FSM) of a pattern is the 2D DFT of one
  period, normalized by 1/(period_rows * period_cols).  With this
  normalization the DC entry of the Bayer FSM is (2G + R + B)/4 and the
  chroma carriers are (2G - R - B)/8 and (B - R)/8 up to integer factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
import math

import numpy as np

SYMBOLS = ("R", "G", "B")


@dataclass(frozen=True)
class CfaPattern:
    """A periodic color filter array described by one period of labels."""

    name: str
    labels: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.labels or not self.labels[0]:
            raise ValueError("pattern period must be non-empty")
        width = len(self.labels[0])
        for row in self.labels:
            if len(row) != width:
                raise ValueError("pattern rows must have equal length")
            for lab in row:
                if lab not in SYMBOLS:
                    raise ValueError(f"unknown channel label {lab!r}")

    @property
    def period_rows(self) -> int:
        return len(self.labels)

    @property
    def period_cols(self) -> int:
        return len(self.labels[0])

    def label_at(self, i: int, j: int) -> str:
        """Channel captured by the photosite at absolute position (i, j)."""
        return self.labels[i % self.period_rows][j % self.period_cols]

    def channel_masks(self, height: int, width: int) -> np.ndarray:
        """Boolean masks of shape (3, height, width), one per R/G/B."""
        ii = np.arange(height)[:, None] % self.period_rows
        jj = np.arange(width)[None, :] % self.period_cols
        grid = np.asarray(self.labels, dtype=object)[ii, jj]
        return np.stack([grid == s for s in SYMBOLS])


BAYER = CfaPattern("bayer", (("G", "R"), ("B", "G")))
QUAD = CfaPattern(
    "quad",
    (
        ("G", "G", "R", "R"),
        ("G", "G", "R", "R"),
        ("B", "B", "G", "G"),
        ("B", "B", "G", "G"),
    ),
)

PATTERNS = {p.name: p for p in (BAYER, QUAD)}


def relative_position(i: int, j: int, pattern: CfaPattern) -> tuple[int, int]:
    """Phase of an absolute photosite position within the pattern period."""
    if i < 0 or j < 0:
        raise ValueError("photosite coordinates must be non-negative")
    return i % pattern.period_rows, j % pattern.period_cols


@dataclass
class MosaicImage:
    """Single-plane raw mosaic tagged with its CFA pattern and value range."""

    samples: np.ndarray
    pattern: CfaPattern
    black_level: float = 0.0
    white_level: float = 1.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 2:
            raise ValueError("mosaic samples must be a 2D array")
        h, w = self.samples.shape
        if h % self.pattern.period_rows or w % self.pattern.period_cols:
            raise ValueError("mosaic dimensions must be multiples of the CFA period")
        if not self.white_level > self.black_level:
            raise ValueError("white_level must exceed black_level")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("mosaic samples must be finite")

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    def normalized(self) -> np.ndarray:
        """Samples mapped to [0, 1] by the black/white levels (float32)."""
        span = self.white_level - self.black_level
        return ((self.samples - self.black_level) / span).astype(np.float32)


@dataclass
class RgbImage:
    """Full-color image, channel-last float32 in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ValueError("RGB data must have shape (H, W, 3)")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("RGB data must be finite")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def mosaic(rgb: RgbImage, pattern: CfaPattern) -> MosaicImage:
    """Sample one channel per photosite according to the CFA pattern."""
    h, w = rgb.height, rgb.width
    if h % pattern.period_rows or w % pattern.period_cols:
        raise ValueError("image dimensions must be multiples of the CFA period")
    masks = pattern.channel_masks(h, w)
    out = np.zeros((h, w), dtype=np.float32)
    for c in range(3):
        out[masks[c]] = rgb.data[:, :, c][masks[c]]
    return MosaicImage(out, pattern, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Frequency structure matrix
# ---------------------------------------------------------------------------


@dataclass
class FrequencyStructureMatrix:
    """Symbolic + numeric DFT of one CFA period.

    ``coeffs[u, v, s]`` is the complex weight of symbol ``SYMBOLS[s]`` in
    entry (u, v); ``values`` is the matrix evaluated at ``triple``.
    Entry (0, 0) is the DC (luma) term.
    """

    pattern: CfaPattern
    coeffs: np.ndarray
    triple: tuple[float, float, float]
    values: np.ndarray = field(init=False)

    def __post_init__(self):
        self.values = self.evaluate(self.triple)

    def evaluate(self, triple) -> np.ndarray:
        t = np.asarray(triple, dtype=np.complex128)
        if t.shape != (3,):
            raise ValueError("triple must hold exactly (R, G, B)")
        return self.coeffs @ t

    def zero_mask(self, tol: float = 1e-12) -> np.ndarray:
        """Entries whose symbolic coefficients all vanish (structural zeros)."""
        return np.all(np.abs(self.coeffs) <= tol, axis=2)

    def entry_str(self, u: int, v: int) -> str:
        return _complex_combo_str(self.coeffs[u, v])

    def symbolic(self) -> list[list[str]]:
        p, q = self.coeffs.shape[:2]
        return [[self.entry_str(u, v) for v in range(q)] for u in range(p)]


def fsm(pattern: CfaPattern, triple=(1.0, 1.0, 1.0)) -> FrequencyStructureMatrix:
    """FSM of one pattern period, normalized by the period size.

    The symbolic decomposition is recovered by evaluating the DFT at the
    basis triples (1,0,0), (0,1,0), (0,0,1): the transform is linear in
    the channel values, so those transforms ARE the per-symbol weights.
    """
    p, q = pattern.period_rows, pattern.period_cols
    coeffs = np.zeros((p, q, 3), dtype=np.complex128)
    masks = pattern.channel_masks(p, q)
    for s in range(3):
        coeffs[:, :, s] = np.fft.fft2(masks[s].astype(np.float64)) / (p * q)
    # Snap numeric dust from the FFT so structural zeros are exact.
    coeffs.real[np.abs(coeffs.real) < 1e-12] = 0.0
    coeffs.imag[np.abs(coeffs.imag) < 1e-12] = 0.0
    return FrequencyStructureMatrix(pattern, coeffs, tuple(float(x) for x in triple))


def _combo_str(weights) -> str:
    """Render a real linear combination of R/G/B as e.g. '(2G+R+B)/4'."""
    fracs = []
    for wgt in weights:
        f = Fraction(float(wgt)).limit_denominator(64)
        if abs(float(f) - float(wgt)) > 1e-9:
            # fall back to decimals for non-dyadic weights
            return " + ".join(
                f"{float(w):+.6g}{s}" for w, s in zip(weights, SYMBOLS) if w != 0
            )
        fracs.append(f)
    if all(f == 0 for f in fracs):
        return "0"
    den = math.lcm(*(f.denominator for f in fracs))
    nums = {s: int(f * den) for f, s in zip(fracs, SYMBOLS)}
    # display order G, R, B mirrors the luma/chroma carrier notation;
    # positive terms lead so '(B-R)/4' never renders as '(-R+B)/4'
    order = [s for s in ("G", "R", "B") if nums[s] > 0]
    order += [s for s in ("G", "R", "B") if nums[s] < 0]
    terms = ""
    for s in order:
        n = nums[s]
        sign = "-" if n < 0 else ("+" if terms else "")
        mag = abs(n)
        terms += f"{sign}{'' if mag == 1 else mag}{s}"
    single = "+" not in terms[1:] and "-" not in terms[1:]
    if den == 1:
        return terms if single else f"({terms})"
    return f"{terms}/{den}" if single else f"({terms})/{den}"


def _complex_combo_str(cweights) -> str:
    re = _combo_str([c.real for c in cweights])
    im = _combo_str([c.imag for c in cweights])
    if im == "0":
        return re
    if re == "0":
        return f"{im} i" if not im.startswith("-") else f"-{im[1:]} i"
    if im.startswith("-"):
        return f"{re} - {im[1:]} i"
    return f"{re} + {im} i"


# ---------------------------------------------------------------------------
# Classical Quad Bayer reductions
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _swap_assignment(quad: CfaPattern, bayer: CfaPattern) -> tuple:
    """Per-tile sample moves turning a Quad tile into full-resolution Bayer.

    Every source photosite moves to the nearest free target site of the
    same color within its 4x4 tile (squared Euclidean distance, ties
    broken by row-major target order; sources visited row-major).  Color
    counts per tile match (4 R, 8 G, 4 B), so the result is a bijection.
    """
    tp, tq = quad.period_rows, quad.period_cols
    sources: dict[str, list] = {s: [] for s in SYMBOLS}
    targets: dict[str, list] = {s: [] for s in SYMBOLS}
    for i in range(tp):
        for j in range(tq):
            sources[quad.label_at(i, j)].append((i, j))
            targets[bayer.label_at(i, j)].append((i, j))
    for s in SYMBOLS:
        if len(sources[s]) != len(targets[s]):
            raise ValueError("patterns are not swap-compatible")
    moves = []
    for s in SYMBOLS:
        free = sorted(targets[s])
        for src in sources[s]:
            # nearest free target; the (distance, site) key breaks ties row-major
            best = min(free, key=lambda t: ((t[0] - src[0]) ** 2 + (t[1] - src[1]) ** 2, t))
            free.remove(best)
            moves.append((src, best))
    return tuple(moves)


def quad_to_bayer_swap(m: MosaicImage) -> MosaicImage:
    """Remosaic by pixel swapping: rearrange samples into a Bayer layout.

    Pure permutation, no filtering, so every sample value survives
    unchanged (and so does the noise).
    """
    if m.pattern.name != "quad":
        raise ValueError("swap remosaic expects a Quad Bayer mosaic")
    out = np.empty_like(m.samples)
    for (si, sj), (ti, tj) in _swap_assignment(m.pattern, BAYER):
        out[ti::4, tj::4] = m.samples[si::4, sj::4]
    return MosaicImage(out, BAYER, m.black_level, m.white_level)


def bin2x2(m: MosaicImage) -> MosaicImage:
    """Average each aligned same-color 2x2 cell; halves both dimensions.

    The binned grid is a valid Bayer mosaic at half resolution.
    """
    if m.pattern.name != "quad":
        raise ValueError("2x2 binning expects a Quad Bayer mosaic")
    h, w = m.samples.shape
    cells = m.samples.reshape(h // 2, 2, w // 2, 2)
    out = cells.mean(axis=(1, 3)).astype(np.float32)
    return MosaicImage(out, BAYER, m.black_level, m.white_level)


def bilinear_demosaic(m: MosaicImage) -> RgbImage:
    """Bilinear demosaic of a Bayer mosaic.

    Missing channel values are the mean of the nearest same-channel
    neighbors (2 or 4 of them; edges replicate).  Known samples pass
    through unchanged.  Output is normalized to [0, 1].
    """
    if m.pattern.period_rows != 2 or m.pattern.period_cols != 2:
        raise ValueError("bilinear demosaic expects a Bayer mosaic")
    h, w = m.samples.shape
    plane = m.normalized().astype(np.float64)
    masks = m.pattern.channel_masks(h, w)
    out = np.empty((h, w, 3), dtype=np.float64)
    for c in range(3):
        mask = masks[c].astype(np.float64)
        vals = plane * mask
        # 3x3 box over edge-replicated masked plane: at any missing site
        # the in-window same-channel sites are exactly the nearest 2 or 4.
        num = _box3(np.pad(vals, 1, mode="edge"))
        den = _box3(np.pad(mask, 1, mode="edge"))
        interp = num / np.maximum(den, 1e-12)
        out[:, :, c] = np.where(masks[c], plane, interp)
    return RgbImage(np.clip(out, 0.0, 1.0).astype(np.float32))


def _box3(padded: np.ndarray) -> np.ndarray:
    """Sum over all 3x3 windows of a padded plane (valid positions)."""
    win = np.lib.stride_tricks.sliding_window_view(padded, (3, 3))
    return win.sum(axis=(2, 3))
