"""Hard-patch mining: spectral moire scoring, zipper scoring, selection.

A reconstruction is compared against its ground truth in two ways.  The
moire score looks at the log ratio of the two power spectra inside a
radial frequency band; false periodic structure shows up as mass the
ground truth does not have.  The zipper score compares alternation
energy (mean absolute second difference along rows and columns), which
spikes on the column-comb artifacts remosaicing tends to leave behind.
Patches are ranked by the sum of the min-max normalized scores and
selected greedily with an overlap cap per image.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .imgio import atomic_write_bytes

DEFAULT_ETA = 1e-6
BAND_CUTOFF = 0.95  # fraction of pi kept in the radial band

MANIFEST_COLUMNS = ("image_id", "row", "col", "size", "moire", "zipper", "rank")


def _as_channels(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"expected a 2D or 3D image, got shape {arr.shape}")
    return arr


def _check_pair(ci: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ci = _as_channels(ci)
    gt = _as_channels(gt)
    if ci.shape != gt.shape:
        raise ValueError(f"pair shape mismatch: {ci.shape} vs {gt.shape}")
    return ci, gt


def band_mask(height: int, width: int, cutoff: float = BAND_CUTOFF) -> np.ndarray:
    """True where the radial frequency magnitude is inside the band."""
    wu = 2.0 * np.pi * np.fft.fftfreq(height)
    wv = 2.0 * np.pi * np.fft.fftfreq(width)
    radial = np.sqrt(wu[:, None] ** 2 + wv[None, :] ** 2)
    return radial <= cutoff * np.pi


def rho_map(ci: np.ndarray, gt: np.ndarray, eta: float = DEFAULT_ETA) -> np.ndarray:
    """Log spectral power ratio per channel; exactly 1 outside the band."""
    ci, gt = _check_pair(ci, gt)
    if eta <= 0:
        raise ValueError("eta must be positive")
    mask = band_mask(ci.shape[0], ci.shape[1])
    out = np.ones_like(ci)
    for ch in range(ci.shape[2]):
        pc = np.abs(np.fft.fft2(ci[:, :, ch])) ** 2
        pg = np.abs(np.fft.fft2(gt[:, :, ch])) ** 2
        rho = np.log((pc + eta) / (pg + eta))
        out[:, :, ch] = np.where(mask, rho, 1.0)
    return out


def moire_score(ci: np.ndarray, gt: np.ndarray, eta: float = DEFAULT_ETA) -> float:
    """Mean absolute in-band log power ratio, averaged over channels."""
    ci, gt = _check_pair(ci, gt)
    rho = rho_map(ci, gt, eta)
    mask = band_mask(ci.shape[0], ci.shape[1])
    return float(np.mean([np.mean(np.abs(rho[:, :, c][mask])) for c in range(ci.shape[2])]))


def _alternation_energy(plane: np.ndarray) -> float:
    rows = np.abs(plane[:, 2:] - 2.0 * plane[:, 1:-1] + plane[:, :-2])
    cols = np.abs(plane[2:, :] - 2.0 * plane[1:-1, :] + plane[:-2, :])
    return float(np.mean(rows) + np.mean(cols))


def zipper_score(ci: np.ndarray, gt: np.ndarray) -> float:
    """Absolute alternation-energy difference, averaged over channels."""
    ci, gt = _check_pair(ci, gt)
    if ci.shape[0] < 3 or ci.shape[1] < 3:
        raise ValueError("zipper score needs at least 3x3 images")
    diffs = [
        abs(_alternation_energy(ci[:, :, c]) - _alternation_energy(gt[:, :, c]))
        for c in range(ci.shape[2])
    ]
    return float(np.mean(diffs))


@dataclass(frozen=True)
class PatchScore:
    image_id: str
    row: int
    col: int
    size: int
    moire: float
    zipper: float
    rank: int


@dataclass(frozen=True)
class MiningResult:
    patches: list[PatchScore]
    exhausted: bool  # fewer acceptable candidates than requested


def _normalize(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def select_hard_patches(
    corpus,
    k: int = 2000,
    patch: int = 128,
    stride: int | None = None,
    eta: float = DEFAULT_ETA,
) -> MiningResult:
    """Rank patch windows of (image_id, ci, gt) triples and pick the top k.

    Both scores are min-max normalized over the candidate pool and summed;
    candidates are accepted in descending combined order, skipping any that
    would overlap an accepted patch from the same image by more than half
    the patch area.  Ties break on (image_id, row, col) so the outcome does
    not depend on input ordering quirks.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if patch < 4:
        raise ValueError("patch must be at least 4")
    if stride is None:
        stride = max(1, patch // 2)
    if stride < 1:
        raise ValueError("stride must be at least 1")
    if not corpus:
        raise ValueError("corpus is empty")

    ids = [str(entry[0]) for entry in corpus]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate image ids in corpus")

    cands = []  # (image_id, row, col, moire, zipper)
    for image_id, ci, gt in corpus:
        ci, gt = _check_pair(ci, gt)
        h, w = ci.shape[0], ci.shape[1]
        if patch > h or patch > w:
            raise ValueError(f"patch {patch} exceeds image {image_id!r} of {h}x{w}")
        for r in range(0, h - patch + 1, stride):
            for c in range(0, w - patch + 1, stride):
                wc = ci[r : r + patch, c : c + patch]
                wg = gt[r : r + patch, c : c + patch]
                cands.append(
                    (str(image_id), r, c, moire_score(wc, wg, eta), zipper_score(wc, wg))
                )

    nm = _normalize(np.array([c[3] for c in cands]))
    nz = _normalize(np.array([c[4] for c in cands]))
    order = sorted(
        range(len(cands)),
        key=lambda i: (-(nm[i] + nz[i]), cands[i][0], cands[i][1], cands[i][2]),
    )

    limit = patch * patch / 2.0
    accepted: list[PatchScore] = []
    taken: dict[str, list[tuple[int, int]]] = {}
    for idx in order:
        if len(accepted) == k:
            break
        image_id, r, c, mo, zi = cands[idx]
        clash = False
        for pr, pc in taken.get(image_id, ()):
            inter = max(0, patch - abs(r - pr)) * max(0, patch - abs(c - pc))
            if inter > limit:
                clash = True
                break
        if clash:
            continue
        accepted.append(PatchScore(image_id, r, c, patch, mo, zi, len(accepted) + 1))
        taken.setdefault(image_id, []).append((r, c))

    return MiningResult(accepted, exhausted=len(accepted) < k)


def manifest_bytes(patches: list[PatchScore]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_COLUMNS)
    for p in patches:
        writer.writerow([p.image_id, p.row, p.col, p.size, repr(p.moire), repr(p.zipper), p.rank])
    return buf.getvalue().encode("utf-8")


def write_manifest(path: str | Path, patches: list[PatchScore]) -> Path:
    path = Path(path)
    atomic_write_bytes(path, manifest_bytes(patches))
    return path


def read_manifest(path: str | Path) -> list[PatchScore]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != MANIFEST_COLUMNS:
        raise DataError(f"manifest {path} has a bad header")
    out = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(MANIFEST_COLUMNS):
            raise DataError(f"manifest {path} line {line_no}: wrong column count")
        try:
            out.append(
                PatchScore(
                    image_id=row[0],
                    row=int(row[1]),
                    col=int(row[2]),
                    size=int(row[3]),
                    moire=float(row[4]),
                    zipper=float(row[5]),
                    rank=int(row[6]),
                )
            )
        except ValueError as exc:
            raise DataError(f"manifest {path} line {line_no}: {exc}") from exc
    return out
