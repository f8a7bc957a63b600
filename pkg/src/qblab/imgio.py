"""File formats: 16-bit PGM raw mosaics with .cfa sidecars, PNG for RGB.

All writers are atomic (write to a temp file in the target directory,
then rename), so a failed command never leaves a partial file behind.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import cv2
import numpy as np

from .cfa import PATTERNS, MosaicImage, RgbImage
from .errors import DataError

PGM_MAXVAL = 65535


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write-then-rename so readers never observe a partial file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar_path(pgm_path: str | Path) -> Path:
    return Path(pgm_path).with_suffix(".cfa")


def encode_pgm(m: MosaicImage) -> bytes:
    """16-bit big-endian binary PGM; [black, white] maps linearly onto
    [0, 65535]."""
    span = m.white_level - m.black_level
    q = np.rint((m.samples.astype(np.float64) - m.black_level) / span * PGM_MAXVAL)
    q = np.clip(q, 0, PGM_MAXVAL).astype(">u2")
    header = f"P5\n{m.width} {m.height}\n{PGM_MAXVAL}\n".encode("ascii")
    return header + q.tobytes()


def encode_sidecar(m: MosaicImage) -> bytes:
    lines = [
        f"pattern={m.pattern.name}",
        f"period={m.pattern.period_rows}x{m.pattern.period_cols}",
        f"black_level={m.black_level!r}",
        f"white_level={m.white_level!r}",
    ]
    return ("\n".join(lines) + "\n").encode("ascii")


def write_mosaic(m: MosaicImage, path: str | Path) -> tuple[Path, Path]:
    """Write the PGM and its .cfa sidecar; returns both paths."""
    path = Path(path)
    atomic_write_bytes(path, encode_pgm(m))
    side = sidecar_path(path)
    atomic_write_bytes(side, encode_sidecar(m))
    return path, side


def _parse_pgm(data: bytes, path) -> np.ndarray:
    # header tokens may be separated by arbitrary whitespace and
    # '#' comment lines
    pos = 0
    tokens = []
    while len(tokens) < 4:
        if pos >= len(data):
            raise DataError(f"{path}: truncated PGM header")
        chunk = data[pos]
        if chr(chunk).isspace():
            pos += 1
            continue
        if chunk == ord("#"):
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(data) and not chr(data[end]).isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval != PGM_MAXVAL:
        raise DataError(f"{path}: expected maxval {PGM_MAXVAL}, found {maxval}")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos:]
    if len(raster) != width * height * 2:
        raise DataError(f"{path}: raster size mismatch")
    return np.frombuffer(raster, dtype=">u2").reshape(height, width)


def _parse_sidecar(path: Path) -> dict:
    if not path.exists():
        raise DataError(f"missing CFA sidecar {path}")
    fields = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}: malformed sidecar line {line!r}")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
    return fields


def read_mosaic(path: str | Path) -> MosaicImage:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing raw mosaic {path}")
    grid = _parse_pgm(path.read_bytes(), path)
    fields = _parse_sidecar(sidecar_path(path))
    try:
        pattern = PATTERNS[fields["pattern"]]
        black = float(fields["black_level"])
        white = float(fields["white_level"])
    except KeyError as exc:
        raise DataError(f"{sidecar_path(path)}: missing sidecar key {exc}") from exc
    declared = fields.get("period")
    actual = f"{pattern.period_rows}x{pattern.period_cols}"
    if declared is not None and declared != actual:
        raise DataError(f"{sidecar_path(path)}: period {declared} does not match {actual}")
    samples = black + grid.astype(np.float64) / PGM_MAXVAL * (white - black)
    try:
        return MosaicImage(samples.astype(np.float32), pattern, black, white)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def write_rgb(img: RgbImage, path: str | Path, bit_depth: int = 8) -> Path:
    """PNG-encode an RGB image at 8 or 16 bits per channel."""
    if bit_depth == 8:
        arr = np.rint(img.data.astype(np.float64) * 255).clip(0, 255).astype(np.uint8)
    elif bit_depth == 16:
        arr = np.rint(img.data.astype(np.float64) * 65535).clip(0, 65535).astype(np.uint16)
    else:
        raise ValueError("bit_depth must be 8 or 16")
    ok, buf = cv2.imencode(".png", arr[:, :, ::-1])  # RGB -> BGR
    if not ok:
        raise DataError(f"PNG encoding failed for {path}")
    path = Path(path)
    atomic_write_bytes(path, buf.tobytes())
    return path


def read_rgb(path: str | Path) -> RgbImage:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing image {path}")
    raw = np.frombuffer(path.read_bytes(), np.uint8)
    arr = cv2.imdecode(raw, cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise DataError(f"{path}: not a decodable image")
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.shape[2] == 4:
        arr = arr[:, :, :3]
    arr = arr[:, :, ::-1]  # BGR -> RGB
    if arr.dtype == np.uint8:
        data = arr.astype(np.float32) / 255.0
    elif arr.dtype == np.uint16:
        data = arr.astype(np.float32) / 65535.0
    else:
        raise DataError(f"{path}: unsupported sample type {arr.dtype}")
    return RgbImage(data)
