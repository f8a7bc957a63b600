"""The six batch operations behind the service endpoints and the CLI.

Everything here is path-in/path-out: callers hand over file locations,
operations read, compute, write atomically and return a summary dict
that serializes straight to JSON.  All randomness flows from a single
seed; anything per-image is derived by hashing the seed together with
the image id, so adding or removing corpus members never shifts the
noise another image receives.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .cfa import (
    BAYER,
    PATTERNS,
    QUAD,
    RgbImage,
    bilinear_demosaic,
    bin2x2,
    fsm,
    mosaic,
    quad_to_bayer_swap,
)
from .errors import DataError, UsageError
from .imgio import atomic_write_bytes, read_mosaic, read_rgb, write_mosaic, write_rgb
from .metrics import kld, psnr, ssim
from .mining import read_manifest, select_hard_patches, write_manifest
from .model import DualHeadNet, ModelConfig, load_state, save_state
from .noise import NoiseParams, add_noise
from .training import LossWeights, TrainConfig, curve_rows, fit_toy

_MODEL_KEYS = {
    "base_channels": int,
    "ca_stack_depth": int,
    "n1": int,
    "n2": int,
    "dwt_levels": int,
    "window_size": int,
    "kernel_size": int,
    "aggregation_mode": str,
    "attn_heads": int,
}
_TRAIN_KEYS = {
    "learning_rate": float,
    "batch_size": int,
    "patch_size": int,
    "beta1": float,
    "beta2": float,
    "eps": float,
    "hard_boost": float,
}
_LOSS_KEYS = {"alpha1": float, "alpha2": float}


def derive_seed(seed: int, image_id: str) -> int:
    """Stable per-image seed: first 8 bytes of sha256('<seed>:<id>')."""
    digest = hashlib.sha256(f"{seed}:{image_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _lookup_pattern(name: str):
    try:
        return PATTERNS[name]
    except KeyError:
        raise UsageError(f"unknown pattern {name!r}; choose from {sorted(PATTERNS)}") from None


def parse_triple(text: str) -> tuple[float, float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise UsageError(f"triple must be 'R,G,B', got {text!r}")
    try:
        r, g, b = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"triple must hold three numbers, got {text!r}") from None
    return (r, g, b)


def parse_config_text(text: str) -> dict[str, str]:
    """key=value lines; '#' starts a comment; blank lines ignored."""
    pairs: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {line_no}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise UsageError(f"config line {line_no}: empty key")
        if key in pairs:
            raise UsageError(f"config line {line_no}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _coerce(key: str, value: str, caster):
    try:
        return caster(value)
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot parse {value!r} as {caster.__name__}") from None


def load_train_config(path: str | Path | None, steps: int, seed: int):
    """Split a config file into (ModelConfig, TrainConfig, LossWeights)."""
    pairs: dict[str, str] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise DataError(f"missing config file {path}")
        pairs = parse_config_text(path.read_text(encoding="utf-8"))
    model_kwargs, train_kwargs, loss_kwargs = {}, {}, {}
    for key, value in pairs.items():
        if key in _MODEL_KEYS:
            model_kwargs[key] = _coerce(key, value, _MODEL_KEYS[key])
        elif key in _TRAIN_KEYS:
            train_kwargs[key] = _coerce(key, value, _TRAIN_KEYS[key])
        elif key in _LOSS_KEYS:
            loss_kwargs[key] = _coerce(key, value, _LOSS_KEYS[key])
        else:
            raise UsageError(f"unknown config key {key!r}")
    try:
        model_cfg = ModelConfig(**model_kwargs)
        train_cfg = TrainConfig(steps=steps, seed=derive_seed(seed, "sampler"), **train_kwargs)
        weights = LossWeights(**loss_kwargs)
    except ValueError as exc:
        raise UsageError(f"bad config value: {exc}") from exc
    return model_cfg, train_cfg, weights


def _prepare_out(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def op_simulate(
    input_path: str,
    out_path: str,
    pattern: str = "quad",
    noise_db: float = 0.0,
    read_sigma: float = 0.005,
    shot_scale: float = 0.0005,
    seed: int = 0,
) -> dict:
    pat = _lookup_pattern(pattern)
    rgb = read_rgb(input_path)
    image_id = Path(input_path).stem
    try:
        clean = mosaic(rgb, pat)
    except ValueError as exc:
        raise DataError(f"{input_path}: {exc}") from exc
    try:
        params = NoiseParams(
            gain_db=noise_db,
            read_sigma_base=read_sigma,
            shot_scale_base=shot_scale,
            seed=derive_seed(seed, image_id),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    noisy = add_noise(clean, params)
    out = _prepare_out(out_path)
    pgm, sidecar = write_mosaic(noisy, out)
    return {
        "out": str(pgm),
        "sidecar": str(sidecar),
        "height": noisy.height,
        "width": noisy.width,
        "pattern": pat.name,
        "image_seed": params.seed,
    }


def op_remosaic(
    input_path: str,
    out_path: str,
    method: str = "djrd",
    checkpoint: str | None = None,
) -> dict:
    if method not in ("djrd", "swap", "bin2x2"):
        raise UsageError(f"unknown method {method!r}; choose from ['djrd', 'swap', 'bin2x2']")
    if method == "djrd" and checkpoint is None:
        raise UsageError("method 'djrd' requires --checkpoint")
    m = read_mosaic(input_path)
    if method == "swap":
        run = quad_to_bayer_swap
    elif method == "bin2x2":
        run = bin2x2
    else:
        run = load_state(checkpoint).forward
    try:
        result = run(m)
    except ValueError as exc:
        raise DataError(f"{input_path}: {exc}") from exc
    out = _prepare_out(out_path)
    pgm, sidecar = write_mosaic(result, out)
    return {
        "out": str(pgm),
        "sidecar": str(sidecar),
        "method": method,
        "height": result.height,
        "width": result.width,
        "pattern": result.pattern.name,
    }


def _scan_pairs(directory: str | Path, left_suffix: str, right_suffix: str):
    """Sorted (stem, left_path, right_path) triples; unpaired stems fail."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"missing directory {directory}")
    left = {p.name[: -len(left_suffix)]: p for p in directory.glob(f"*{left_suffix}")}
    right = {p.name[: -len(right_suffix)]: p for p in directory.glob(f"*{right_suffix}")}
    odd = sorted(set(left) ^ set(right))
    if odd:
        raise DataError(
            f"{directory}: unpaired stems {odd[:5]} (need both {left_suffix} and {right_suffix})"
        )
    if not left:
        raise DataError(f"{directory}: no *{left_suffix} / *{right_suffix} pairs found")
    return [(stem, left[stem], right[stem]) for stem in sorted(left)]


def op_train(
    corpus_dir: str,
    out_path: str,
    steps: int = 500,
    config: str | None = None,
    hard_manifest: str | None = None,
    seed: int = 0,
) -> dict:
    if steps < 0:
        raise UsageError("steps must be non-negative")
    model_cfg, train_cfg, weights = load_train_config(config, steps, seed)
    if train_cfg.patch_size % model_cfg.min_multiple():
        raise UsageError(
            f"patch_size {train_cfg.patch_size} must be a multiple of "
            f"{model_cfg.min_multiple()} for this model config"
        )

    pairs = _scan_pairs(corpus_dir, ".quad.pgm", ".bayer.pgm")
    stems = []
    corpus = []
    for stem, quad_path, bayer_path in pairs:
        quad = read_mosaic(quad_path)
        bayer = read_mosaic(bayer_path)
        if quad.pattern.name != "quad":
            raise DataError(f"{quad_path}: expected a quad mosaic, got {quad.pattern.name}")
        if bayer.pattern.name != "bayer":
            raise DataError(f"{bayer_path}: expected a bayer mosaic, got {bayer.pattern.name}")
        if quad.samples.shape != bayer.samples.shape:
            raise DataError(f"{stem}: quad/bayer shapes differ")
        stems.append(stem)
        corpus.append((quad.samples, bayer.samples))

    hard_set = []
    if hard_manifest is not None:
        index = {stem: i for i, stem in enumerate(stems)}
        for p in read_manifest(hard_manifest):
            if p.image_id not in index:
                raise DataError(f"hard manifest references unknown image {p.image_id!r}")
            hard_set.append((index[p.image_id], p.row, p.col))

    model = DualHeadNet(model_cfg, seed=derive_seed(seed, "weights"))
    curve = fit_toy(model, corpus, train_cfg, weights, hard_set)

    out = _prepare_out(out_path)
    save_state(model, out)
    curve_path = Path(str(out) + ".curve.csv")
    atomic_write_bytes(curve_path, ("\n".join(curve_rows(curve)) + "\n").encode("utf-8"))
    return {
        "checkpoint": str(out),
        "curve": str(curve_path),
        "steps": steps,
        "n_images": len(corpus),
        "n_hard": len(hard_set),
        "initial_loss": curve[0].total if curve else None,
        "final_loss": curve[-1].total if curve else None,
    }


def op_mine(pairs_dir: str, out_path: str, k: int = 2000, patch: int = 128) -> dict:
    if k < 1:
        raise UsageError("k must be at least 1")
    if patch < 4 or patch % 4:
        raise UsageError("patch must be a positive multiple of 4")
    pairs = _scan_pairs(pairs_dir, ".ci.png", ".gt.png")
    corpus = []
    for stem, ci_path, gt_path in pairs:
        ci = read_rgb(ci_path)
        gt = read_rgb(gt_path)
        if ci.data.shape != gt.data.shape:
            raise DataError(f"{stem}: ci/gt shapes differ")
        corpus.append((stem, ci.data, gt.data))
    try:
        result = select_hard_patches(corpus, k=k, patch=patch)
    except ValueError as exc:
        raise DataError(str(exc)) from exc

    out = _prepare_out(out_path)
    write_manifest(out, result.patches)

    # crops double as a training corpus: quad/bayer raws mosaicked from gt
    crops_dir = out.parent / (out.stem + "_crops")
    crops_dir.mkdir(parents=True, exist_ok=True)
    by_id = {stem: (ci, gt) for stem, ci, gt in corpus}
    for p in result.patches:
        ci, gt = by_id[p.image_id]
        window = (slice(p.row, p.row + p.size), slice(p.col, p.col + p.size))
        stem = f"{p.image_id}_r{p.row:04d}_c{p.col:04d}"
        ci_crop = RgbImage(np.clip(ci[window], 0.0, 1.0))
        gt_crop = RgbImage(np.clip(gt[window], 0.0, 1.0))
        write_rgb(ci_crop, crops_dir / f"{stem}.ci.png")
        write_rgb(gt_crop, crops_dir / f"{stem}.gt.png")
        write_mosaic(mosaic(gt_crop, QUAD), crops_dir / f"{stem}.quad.pgm")
        write_mosaic(mosaic(gt_crop, BAYER), crops_dir / f"{stem}.bayer.pgm")

    return {
        "manifest": str(out),
        "crops_dir": str(crops_dir),
        "n_patches": len(result.patches),
        "exhausted": result.exhausted,
    }


def _fmt_metric(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def op_evaluate(pred_dir: str, gt_dir: str, out_path: str, domain: str = "bayer") -> dict:
    if domain not in ("bayer", "srgb"):
        raise UsageError(f"unknown domain {domain!r}; choose from ['bayer', 'srgb']")
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise DataError(f"missing directory {d}")
    preds = {p.name[: -len(".pgm")]: p for p in pred_dir.glob("*.pgm")}
    gts = {p.name[: -len(".pgm")]: p for p in gt_dir.glob("*.pgm")}
    if set(preds) != set(gts):
        odd = sorted(set(preds) ^ set(gts))
        raise DataError(f"pred/gt stems do not match; unpaired: {odd[:5]}")
    if not preds:
        raise DataError("no .pgm files to evaluate")

    rows = ["image_id,domain,psnr,ssim,kld"]
    psnrs, ssims, klds = [], [], []
    for stem in sorted(preds):
        pred = read_mosaic(preds[stem])
        gt = read_mosaic(gts[stem])
        try:
            if domain == "bayer":
                p = psnr(pred.samples, gt.samples, peak=gt.white_level - gt.black_level)
                d = kld(pred, gt)
                s = None
            else:
                pr = bilinear_demosaic(pred)
                gr = bilinear_demosaic(gt)
                p = psnr(pr.data, gr.data, peak=1.0)
                s = ssim(pr.data, gr.data, peak=1.0)
                d = None
        except ValueError as exc:
            raise DataError(f"{stem}: {exc}") from exc
        psnrs.append(p)
        if s is not None:
            ssims.append(s)
        if d is not None:
            klds.append(d)
        rows.append(f"{stem},{domain},{_fmt_metric(p)},{_fmt_metric(s)},{_fmt_metric(d)}")

    mean_psnr = float(np.mean(psnrs))
    mean_ssim = float(np.mean(ssims)) if ssims else None
    mean_kld = float(np.mean(klds)) if klds else None
    rows.append(
        f"mean,{domain},{_fmt_metric(mean_psnr)},{_fmt_metric(mean_ssim)},{_fmt_metric(mean_kld)}"
    )

    out = _prepare_out(out_path)
    atomic_write_bytes(out, ("\n".join(rows) + "\n").encode("utf-8"))
    return {
        "report": str(out),
        "domain": domain,
        "n_images": len(preds),
        "mean_psnr": mean_psnr,
        "mean_ssim": mean_ssim,
        "mean_kld": mean_kld,
    }


def op_analyze_fsm(pattern: str = "quad", triple: str | None = None) -> dict:
    pat = _lookup_pattern(pattern)
    values = parse_triple(triple) if triple is not None else (1.0, 1.0, 1.0)
    matrix = fsm(pat, values)
    zeros = matrix.zero_mask()
    zero_rows = [int(i) for i in range(zeros.shape[0]) if zeros[i, :].all()]
    zero_cols = [int(j) for j in range(zeros.shape[1]) if zeros[:, j].all()]
    numeric = [
        [{"re": float(z.real), "im": float(z.imag)} for z in row] for row in matrix.values
    ]
    return {
        "pattern": pat.name,
        "triple": list(values),
        "symbolic": matrix.symbolic(),
        "numeric": numeric,
        "zeros": zeros.tolist(),
        "zero_rows": zero_rows,
        "zero_cols": zero_cols,
    }
