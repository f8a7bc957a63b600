"""Shared builders for on-disk corpora used by pipeline, service and CLI tests."""

import numpy as np
import pytest

from qblab.cfa import BAYER, QUAD, MosaicImage, RgbImage
from qblab.imgio import write_mosaic, write_rgb
from qblab.scenes import capture_pair, inject_banding, inject_zipper, make_scene

TOY_CONFIG = "\n".join(
    [
        "# tiny model so tests stay fast",
        "base_channels = 8",
        "window_size = 4",
        "ca_stack_depth = 1",
        "batch_size = 1",
        "patch_size = 32",
        "",
    ]
)


def write_scene_png(path, seed, size=64):
    rgb = make_scene(seed, size, size)
    write_rgb(RgbImage(rgb), path, bit_depth=16)
    return path


def build_train_corpus(directory, n_images, size=64, noise_db=24.0):
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(n_images):
        quad, bayer = capture_pair(make_scene(i, size, size), noise_db=noise_db, seed=i)
        write_mosaic(MosaicImage(quad, QUAD), directory / f"img{i:02d}.quad.pgm")
        write_mosaic(MosaicImage(bayer, BAYER), directory / f"img{i:02d}.bayer.pgm")
    return directory


def build_pair_dir(directory, n_images, size=32, banding_at=None, zipper_at=None):
    """ci/gt PNG pairs; optional (image_index, row, col, region) artifacts."""
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(n_images):
        gt = make_scene(100 + i, size, size)
        ci = gt
        if banding_at is not None and banding_at[0] == i:
            ci = inject_banding(ci, *banding_at[1:], amplitude=0.2)
        if zipper_at is not None and zipper_at[0] == i:
            ci = inject_zipper(ci, *zipper_at[1:], amplitude=0.2)
        write_rgb(RgbImage(np.clip(ci, 0.0, 1.0)), directory / f"p{i:02d}.ci.png", bit_depth=16)
        write_rgb(RgbImage(np.clip(gt, 0.0, 1.0)), directory / f"p{i:02d}.gt.png", bit_depth=16)
    return directory


@pytest.fixture(scope="session")
def toy_checkpoint(tmp_path_factory):
    """A zero-step (initialized) checkpoint for the tiny 8-channel config."""
    from qblab.pipeline import op_train

    root = tmp_path_factory.mktemp("ckpt")
    build_train_corpus(root / "corpus", 1, size=32)
    cfg = root / "toy.cfg"
    cfg.write_text(TOY_CONFIG)
    out = root / "toy.qbck"
    op_train(str(root / "corpus"), str(out), steps=0, config=str(cfg))
    return out
