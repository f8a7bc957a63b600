"""Finite-difference verification of analytic backward passes.

The analytic gradients come from the op at its own precision; the
numeric side always runs a float64 shadow copy with central differences,
so the comparison isolates backward-pass bugs from float32 noise.  The
scalar objective is sum(forward(x) * R) for a fixed random projection R,
which exercises every output coordinate at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GradCheckResult:
    max_rel_err: float
    n_probes: int
    worst_tensor: str

    def __str__(self):
        return (
            f"max rel err {self.max_rel_err:.3e} over {self.n_probes} probes"
            f" (worst: {self.worst_tensor})"
        )


def grad_check(op, x: np.ndarray, h: float = 1e-3, rng=None, max_probes: int = 24) -> GradCheckResult:
    """Compare op.backward against central differences on a shadow copy.

    Probes every coordinate of small tensors and a random subset of
    large ones, for the input and for every parameter.  The reported
    error is max |analytic - numeric| normalized by the largest gradient
    magnitude seen (floored at 1), so it reads as a relative error for
    O(1)-scaled gradients without exploding on near-zero entries.
    """
    rng = rng or np.random.default_rng(0)
    y = op.forward(x)
    r64 = rng.standard_normal(y.shape)
    op.zero_grads()
    gx = op.backward(r64.astype(y.dtype))
    analytic = {"input": np.asarray(gx, dtype=np.float64)}
    for name, g in op.named_grads().items():
        analytic[name] = g.astype(np.float64)

    shadow = op.astype(np.float64)
    tensors = {"input": x.astype(np.float64)}
    tensors.update(shadow.named_params())

    def objective() -> float:
        return float(np.sum(shadow.forward(tensors["input"]) * r64))

    diffs, mags = [], []
    worst = ("", -1.0)
    n_probes = 0
    for name, arr in tensors.items():
        flat = arr.reshape(-1)
        if flat.size <= max_probes:
            idxs = np.arange(flat.size)
        else:
            idxs = rng.choice(flat.size, size=max_probes, replace=False)
        ana_flat = analytic[name].reshape(-1)
        for idx in idxs:
            saved = flat[idx]
            flat[idx] = saved + h
            fp = objective()
            flat[idx] = saved - h
            fm = objective()
            flat[idx] = saved
            num = (fp - fm) / (2.0 * h)
            ana = float(ana_flat[idx])
            diff = abs(ana - num)
            diffs.append(diff)
            mags.extend((abs(ana), abs(num)))
            if diff > worst[1]:
                worst = (name, diff)
            n_probes += 1

    scale = max(1.0, max(mags))
    return GradCheckResult(max(diffs) / scale, n_probes, worst[0])
