"""Request/response bodies for the lab service.

The service moves file paths, not pixel payloads: it is a local daemon
sharing a filesystem with its clients, so requests carry locations and
knobs while responses carry locations and summary statistics.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class SimulateRequest(BaseModel):
    input_path: str
    out_path: str
    pattern: Literal["quad", "bayer"] = "quad"
    noise_db: float = 0.0
    read_sigma: float = Field(default=0.005, ge=0.0)
    shot_scale: float = Field(default=0.0005, ge=0.0)
    seed: int = Field(default=0, ge=0)


class SimulateResponse(BaseModel):
    out: str
    sidecar: str
    height: int
    width: int
    pattern: str
    image_seed: int


class RemosaicRequest(BaseModel):
    input_path: str
    out_path: str
    method: Literal["djrd", "swap", "bin2x2"] = "djrd"
    checkpoint: str | None = None


class RemosaicResponse(BaseModel):
    out: str
    sidecar: str
    method: str
    height: int
    width: int
    pattern: str


class TrainRequest(BaseModel):
    corpus_dir: str
    out_path: str
    steps: int = Field(default=500, ge=0)
    config: str | None = None
    hard_manifest: str | None = None
    seed: int = Field(default=0, ge=0)


class TrainResponse(BaseModel):
    checkpoint: str
    curve: str
    steps: int
    n_images: int
    n_hard: int
    initial_loss: float | None
    final_loss: float | None


class MineRequest(BaseModel):
    pairs_dir: str
    out_path: str
    k: int = Field(default=2000, ge=1)
    patch: int = Field(default=128, ge=4)


class MineResponse(BaseModel):
    manifest: str
    crops_dir: str
    n_patches: int
    exhausted: bool


class EvaluateRequest(BaseModel):
    pred_dir: str
    gt_dir: str
    out_path: str
    domain: Literal["bayer", "srgb"] = "bayer"


class EvaluateResponse(BaseModel):
    report: str
    domain: str
    n_images: int
    # None means infinite (exact match); JSON has no inf literal
    mean_psnr: float | None
    mean_ssim: float | None
    mean_kld: float | None


class FsmRequest(BaseModel):
    pattern: Literal["quad", "bayer"] = "quad"
    triple: str | None = None


class ComplexEntry(BaseModel):
    re: float
    im: float


class FsmResponse(BaseModel):
    pattern: str
    triple: list[float]
    symbolic: list[list[str]]
    numeric: list[list[ComplexEntry]]
    zeros: list[list[bool]]
    zero_rows: list[int]
    zero_cols: list[int]


class ErrorBody(BaseModel):
    kind: Literal["usage", "data", "numeric"]
    detail: str


class HealthResponse(BaseModel):
    status: str
    version: str
