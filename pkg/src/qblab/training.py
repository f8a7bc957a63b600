"""Loss, optimizer and the toy training loop.

The loss is a weighted sum of a pixel L1 term and a frequency term: the
mean absolute deviation of the complex 2D DFT coefficients of the
residual.  Both terms have closed-form gradients; for the frequency term
it follows from the DFT being linear and (up to a factor H*W) unitary:

    d/dx mean|FFT2(x)| = Re(IFFT2(F/|F|)) / (batch * channels)

with the phase factor F/|F| taken as 0 at exact spectral zeros.

The optimizer is plain adaptive moments.  ``fit_toy`` samples aligned
square patches from an in-memory corpus of (noisy quad, clean Bayer)
plane pairs; a hard-patch set may be supplied whose entries enter the
sampling pool with a boosted weight, which is how fine-tuning on mined
bottleneck patches is realized without touching the loss definition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericError
from .model import DualHeadNet

PATCH_ALIGN = 4  # crops must preserve the quad phase grid


@dataclass(frozen=True)
class LossWeights:
    alpha1: float = 0.99
    alpha2: float = 0.01

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    steps: int = 500
    batch_size: int = 2
    patch_size: int = 64
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hard_boost: float = 8.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.steps < 0 or self.batch_size < 1:
            raise ValueError("bad step/batch settings")
        if self.patch_size % PATCH_ALIGN:
            raise ValueError("patch_size must be a multiple of 4")
        if self.hard_boost < 0:
            raise ValueError("hard_boost must be non-negative")


@dataclass(frozen=True)
class LossResult:
    total: float
    l1: float
    fft: float
    grad: np.ndarray = field(repr=False)


def compute_loss(pred: np.ndarray, target: np.ndarray, w: LossWeights | None = None) -> LossResult:
    """Weighted spatial L1 + spectral L1, with the gradient w.r.t. pred."""
    w = w or LossWeights()
    if pred.shape != target.shape:
        raise ValueError(f"loss shape mismatch: {pred.shape} vs {target.shape}")
    d = pred.astype(np.float64) - target.astype(np.float64)
    count = d.size
    l1 = float(np.mean(np.abs(d)))
    grad = w.alpha1 * np.sign(d) / count

    spectrum = np.fft.fft2(d, axes=(-2, -1))
    mag = np.abs(spectrum)
    fft_term = float(np.mean(mag))
    phase = np.divide(spectrum, mag, out=np.zeros_like(spectrum), where=mag > 0)
    lead = count // (d.shape[-1] * d.shape[-2])  # batch * channels
    grad += w.alpha2 * np.real(np.fft.ifft2(phase, axes=(-2, -1))) / lead

    total = w.alpha1 * l1 + w.alpha2 * fft_term
    return LossResult(total, l1, fft_term, grad.astype(pred.dtype))


class Adam(object):
    """Adaptive-moment updates over every tensor of a module."""

    def __init__(self, model: DualHeadNet, cfg: TrainConfig):
        self.model = model
        self.cfg = cfg
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in model.named_params().items()}
        self.v = {k: np.zeros_like(v) for k, v in model.named_params().items()}

    def step(self) -> None:
        cfg = self.cfg
        self.t += 1
        bias1 = 1.0 - cfg.beta1**self.t
        bias2 = 1.0 - cfg.beta2**self.t
        grads = self.model.named_grads()
        for key, param in self.model.named_params().items():
            g = grads[key]
            m = self.m[key]
            v = self.v[key]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * np.square(g)
            update = (m / bias1) / (np.sqrt(v / bias2) + cfg.eps)
            param -= (cfg.learning_rate * update).astype(param.dtype)


def train_step(
    model: DualHeadNet,
    opt: Adam,
    x: np.ndarray,
    y: np.ndarray,
    weights: LossWeights | None = None,
) -> LossResult:
    """One forward/backward/update on a (B,1,H,W) batch pair."""
    pred = model.forward_planes(x)
    res = compute_loss(pred, y, weights)
    if not np.isfinite(res.total):
        raise NumericError(f"non-finite training loss {res.total!r}; lower the learning rate")
    model.zero_grads()
    model.backward(res.grad)
    opt.step()
    return res


HardEntry = tuple[int, int, int]  # corpus index, patch row, patch col


def sample_entries(
    rng: np.random.Generator,
    n_images: int,
    batch_size: int,
    hard_set: list[HardEntry],
    boost: float,
) -> list[tuple[int, tuple[int, int] | None]]:
    """Pick batch entries from the pool of whole images (weight 1 each)
    and pinned hard patches (weight ``boost`` each)."""
    pool: list[tuple[int, tuple[int, int] | None]] = [(i, None) for i in range(n_images)]
    weights = [1.0] * n_images
    for idx, row, col in hard_set:
        pool.append((idx, (row, col)))
        weights.append(boost)
    p = np.asarray(weights, dtype=np.float64)
    picks = rng.choice(len(pool), size=batch_size, p=p / p.sum())
    return [pool[int(i)] for i in picks]


def _aligned_origin(rng: np.random.Generator, extent: int, patch: int) -> int:
    return PATCH_ALIGN * int(rng.integers(0, (extent - patch) // PATCH_ALIGN + 1))


def _clamp_origin(value: int, extent: int, patch: int) -> int:
    value = max(0, min(value, extent - patch))
    return value - value % PATCH_ALIGN


def fit_toy(
    model: DualHeadNet,
    corpus: list[tuple[np.ndarray, np.ndarray]],
    cfg: TrainConfig | None = None,
    weights: LossWeights | None = None,
    hard_set: list[HardEntry] | None = None,
) -> list[LossResult]:
    """Train on random aligned patches; returns the per-step loss curve."""
    cfg = cfg or TrainConfig()
    hard_set = hard_set or []
    if not corpus:
        raise DataError("training corpus is empty")
    for i, (quad, bayer) in enumerate(corpus):
        if quad.shape != bayer.shape:
            raise DataError(f"corpus pair {i}: shape mismatch {quad.shape} vs {bayer.shape}")
        if quad.shape[0] < cfg.patch_size or quad.shape[1] < cfg.patch_size:
            raise DataError(f"corpus pair {i}: smaller than patch size {cfg.patch_size}")
    for idx, row, col in hard_set:
        if not 0 <= idx < len(corpus):
            raise DataError(f"hard-set entry references image {idx} outside the corpus")

    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model, cfg)
    curve: list[LossResult] = []
    for step in range(cfg.steps):
        entries = sample_entries(rng, len(corpus), cfg.batch_size, hard_set, cfg.hard_boost)
        xs, ys = [], []
        for idx, origin in entries:
            quad, bayer = corpus[idx]
            h, w = quad.shape
            if origin is None:
                r = _aligned_origin(rng, h, cfg.patch_size)
                c = _aligned_origin(rng, w, cfg.patch_size)
            else:
                r = _clamp_origin(origin[0], h, cfg.patch_size)
                c = _clamp_origin(origin[1], w, cfg.patch_size)
            xs.append(quad[r : r + cfg.patch_size, c : c + cfg.patch_size])
            ys.append(bayer[r : r + cfg.patch_size, c : c + cfg.patch_size])
        x = np.stack(xs).astype(np.float32)[:, None]
        y = np.stack(ys).astype(np.float32)[:, None]
        try:
            curve.append(train_step(model, opt, x, y, weights))
        except NumericError as exc:
            raise NumericError(f"step {step}: {exc}") from exc
    return curve


def curve_rows(curve: list[LossResult]) -> list[str]:
    """CSV rows (step, l1_term, fft_term, total), header included."""
    rows = ["step,l1_term,fft_term,total"]
    for i, rec in enumerate(curve):
        rows.append(f"{i},{rec.l1:.9g},{rec.fft:.9g},{rec.total:.9g}")
    return rows
