"""Tiny layer framework: parameter registration and explicit backprop.

There is no autodiff graph.  Every layer implements ``forward`` (which
caches what its backward needs) and ``backward`` (which consumes the
cache, accumulates parameter gradients into ``self.grads`` and returns
the gradient w.r.t. its input).  Composite layers chain their children's
backward calls by hand, in reverse order of the forward.

Tensors are plain numpy arrays; float32 is the working precision and
float64 copies (via :meth:`Module.astype`) serve as the shadow mode for
finite-difference gradient checks.
"""

from __future__ import annotations

import copy

import numpy as np


class Module:
    """Base class: a differentiable unit with named params and children."""

    def __init__(self):
        self._param_names: list[str] = []
        self._child_names: list[str] = []
        self.grads: dict[str, np.ndarray] = {}

    # -- registration -------------------------------------------------

    def add_param(self, name: str, value: np.ndarray) -> None:
        value = np.asarray(value)
        setattr(self, name, value)
        self._param_names.append(name)
        self.grads[name] = np.zeros_like(value)

    def add_child(self, name: str, module: "Module") -> "Module":
        setattr(self, name, module)
        self._child_names.append(name)
        return module

    # -- traversal ----------------------------------------------------

    def named_params(self) -> dict[str, np.ndarray]:
        """Live references to every learnable tensor, keyed by path."""
        out = {n: getattr(self, n) for n in self._param_names}
        for cname in self._child_names:
            child: Module = getattr(self, cname)
            for path, arr in child.named_params().items():
                out[f"{cname}.{path}"] = arr
        return out

    def named_grads(self) -> dict[str, np.ndarray]:
        out = {n: self.grads[n] for n in self._param_names}
        for cname in self._child_names:
            child: Module = getattr(self, cname)
            for path, arr in child.named_grads().items():
                out[f"{cname}.{path}"] = arr
        return out

    def zero_grads(self) -> None:
        for n in self._param_names:
            self.grads[n][...] = 0
        for cname in self._child_names:
            getattr(self, cname).zero_grads()

    # -- dtype and state ----------------------------------------------

    def astype(self, dtype) -> "Module":
        """Deep copy with every parameter cast to ``dtype`` (shadow mode)."""
        clone = copy.deepcopy(self)
        clone._cast(np.dtype(dtype))
        return clone

    def _cast(self, dtype) -> None:
        for n in self._param_names:
            setattr(self, n, getattr(self, n).astype(dtype))
            self.grads[n] = self.grads[n].astype(dtype)
        for cname in self._child_names:
            getattr(self, cname)._cast(dtype)

    def load_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        """Replace parameter values; key set and shapes must match exactly."""
        own = self.named_params()
        missing = sorted(set(own) - set(tensors))
        extra = sorted(set(tensors) - set(own))
        if missing or extra:
            raise KeyError(f"tensor key mismatch: missing {missing}, unexpected {extra}")
        for key, arr in tensors.items():
            target = own[key]
            arr = np.asarray(arr, dtype=target.dtype)
            if arr.shape != target.shape:
                raise ValueError(f"{key}: shape {arr.shape} != expected {target.shape}")
            target[...] = arr

    # -- interface ----------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)


class Sequential(Module):
    """Chain of layers; backward replays the chain in reverse."""

    def __init__(self, *layers: Module):
        super().__init__()
        for idx, layer in enumerate(layers):
            self.add_child(f"layer{idx}", layer)
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad_out):
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out
