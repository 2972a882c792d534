"""Minimal layer stack with exact reverse-mode gradients.

Four layer kinds cover everything the networks in this package need:

* ``dense``   - affine map, weights (in, out), bias (out,)
* ``conv1d``  - stride-1, same-padded 1-D convolution over the time axis,
  weights (kernel, in_ch, out_ch), bias (out_ch,); kernel width must be odd
  so the padding is symmetric
* ``sigmoid`` - element-wise logistic, no parameters
* ``flatten`` - reshape between declared extents (used flattening the
  conv output into the bottleneck and un-flattening in the decoder)

All arithmetic is float64.  Inputs may carry a leading batch dimension;
a batch of one is bit-identical to the unbatched call for every layer
except where BLAS kernel selection differs, which training never relies
on (runs are only ever compared like-for-like).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .errors import ShapeError
from .rng import Rng
from .tensors import check_finite


@dataclass(frozen=True)
class LayerSpec:
    """Shape-checked description of one layer.

    ``kernel`` is only meaningful for conv1d.  Extents are per-sample,
    without the batch dimension.
    """

    kind: str
    in_shape: tuple[int, ...]
    out_shape: tuple[int, ...]
    kernel: int = 0

    def __post_init__(self):
        if self.kind not in ("dense", "conv1d", "sigmoid", "flatten"):
            raise ShapeError(f"unknown layer kind {self.kind!r}")
        if self.kind == "dense":
            if len(self.in_shape) != 1 or len(self.out_shape) != 1:
                raise ShapeError("dense layer requires 1-d in/out extents")
        elif self.kind == "conv1d":
            if len(self.in_shape) != 2 or len(self.out_shape) != 2:
                raise ShapeError("conv1d extents must be (width, channels)")
            if self.in_shape[0] != self.out_shape[0]:
                raise ShapeError("conv1d is same-padded; width must be preserved")
            if self.kernel < 1 or self.kernel % 2 == 0:
                raise ShapeError(f"conv1d kernel width must be odd, got {self.kernel}")
        elif self.kind == "sigmoid":
            if self.in_shape != self.out_shape:
                raise ShapeError("sigmoid preserves shape")
        elif self.kind == "flatten":
            if int(np.prod(self.in_shape)) != int(np.prod(self.out_shape)):
                raise ShapeError(
                    f"flatten cannot map {self.in_shape} to {self.out_shape}"
                )


def dense(in_dim: int, out_dim: int) -> LayerSpec:
    return LayerSpec("dense", (in_dim,), (out_dim,))


def conv1d(width: int, in_ch: int, out_ch: int, kernel: int) -> LayerSpec:
    return LayerSpec("conv1d", (width, in_ch), (width, out_ch), kernel=kernel)


def sigmoid(shape) -> LayerSpec:
    shape = tuple(np.atleast_1d(shape).tolist()) if not isinstance(shape, tuple) else shape
    return LayerSpec("sigmoid", shape, shape)


def flatten(in_shape, out_shape) -> LayerSpec:
    return LayerSpec("flatten", tuple(in_shape), tuple(out_shape))


def init_params(spec: LayerSpec, rng: Rng) -> dict:
    """Glorot-uniform weights, zero biases; parameter-free kinds get {}."""
    if spec.kind == "dense":
        d_in, d_out = spec.in_shape[0], spec.out_shape[0]
        limit = np.sqrt(6.0 / (d_in + d_out))
        return {"w": rng.uniform(-limit, limit, (d_in, d_out)),
                "b": np.zeros(d_out)}
    if spec.kind == "conv1d":
        c_in, c_out, k = spec.in_shape[1], spec.out_shape[1], spec.kernel
        limit = np.sqrt(6.0 / (c_in * k + c_out * k))
        return {"w": rng.uniform(-limit, limit, (k, c_in, c_out)),
                "b": np.zeros(c_out)}
    return {}


def _pad_time(x: np.ndarray, pad: int) -> np.ndarray:
    return np.pad(x, ((0, 0), (pad, pad), (0, 0)))


class Network:
    """An ordered stack of layers with parameters and exact gradients.

    Construct either with an ``rng`` (fresh Glorot init) or with an explicit
    ``params`` list aligned with the specs (used when loading checkpoints).
    """

    def __init__(self, specs, rng: Rng | None = None, params=None):
        self.specs = list(specs)
        for i in range(len(self.specs) - 1):
            a, b = self.specs[i], self.specs[i + 1]
            if a.out_shape != b.in_shape:
                raise ShapeError(
                    f"layer {i} ({a.kind}) emits {a.out_shape} but layer "
                    f"{i + 1} ({b.kind}) expects {b.in_shape}"
                )
        if params is not None:
            self.params = [{k: np.asarray(v, dtype=np.float64) for k, v in p.items()}
                           for p in params]
            self._check_param_shapes()
        else:
            if rng is None:
                raise ValueError("need rng or explicit params")
            self.params = [init_params(s, rng.split("layer", i))
                           for i, s in enumerate(self.specs)]

    def _check_param_shapes(self):
        for i, (spec, p) in enumerate(zip(self.specs, self.params)):
            ref = init_params(spec, Rng(0))
            if set(p) != set(ref):
                raise ShapeError(f"layer {i} ({spec.kind}): parameter keys {set(p)}")
            for k in ref:
                if p[k].shape != ref[k].shape:
                    raise ShapeError(
                        f"layer {i} ({spec.kind}): parameter {k} has shape "
                        f"{p[k].shape}, expected {ref[k].shape}"
                    )

    @property
    def in_shape(self) -> tuple[int, ...]:
        return self.specs[0].in_shape

    @property
    def out_shape(self) -> tuple[int, ...]:
        return self.specs[-1].out_shape

    @property
    def n_params(self) -> int:
        return sum(int(a.size) for p in self.params for a in p.values())

    def copy(self) -> "Network":
        return Network(self.specs, params=[{k: v.copy() for k, v in p.items()}
                                           for p in self.params])

    def checksum(self) -> str:
        """Stable digest of all parameter bytes (freeze checks)."""
        import hashlib

        h = hashlib.blake2b(digest_size=16)
        for p in self.params:
            for k in sorted(p):
                h.update(np.ascontiguousarray(p[k]).tobytes())
        return h.hexdigest()

    # -- forward / backward -------------------------------------------------

    def _admit(self, x: np.ndarray, shape: tuple[int, ...], where: str):
        x = np.asarray(x, dtype=np.float64)
        if x.shape == shape:
            return x[None], True
        if x.ndim == len(shape) + 1 and x.shape[1:] == shape:
            return x, False
        raise ShapeError(f"{where}: expected shape {shape} (optionally batched), "
                         f"got {x.shape}")

    def _forward_cached(self, x: np.ndarray):
        """Run the stack, keeping whatever each layer's backward needs."""
        out = x
        cache = []
        for i, (spec, p) in enumerate(zip(self.specs, self.params)):
            if out.shape[1:] != spec.in_shape:
                raise ShapeError(
                    f"layer {i} ({spec.kind}): expected input shape "
                    f"{spec.in_shape}, got {out.shape[1:]}"
                )
            if spec.kind == "dense":
                cache.append(out)
                out = out @ p["w"] + p["b"]
            elif spec.kind == "conv1d":
                pad = (spec.kernel - 1) // 2
                win = sliding_window_view(_pad_time(out, pad), spec.kernel, axis=1)
                cache.append(win)
                out = np.einsum("btcj,jco->bto", win, p["w"]) + p["b"]
            elif spec.kind == "sigmoid":
                out = expit(out)
                cache.append(out)
            else:  # flatten
                cache.append(None)
                out = out.reshape((out.shape[0],) + spec.out_shape)
        return out, cache

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Pure function of (parameters, input); batch dimension optional."""
        xb, squeeze = self._admit(x, self.in_shape, "forward input")
        check_finite(xb, "forward input")
        out, _ = self._forward_cached(xb)
        return out[0] if squeeze else out

    def _backward_from_cache(self, cache, gy: np.ndarray):
        grads = [None] * len(self.specs)
        g = gy
        for i in range(len(self.specs) - 1, -1, -1):
            spec, p = self.specs[i], self.params[i]
            if spec.kind == "dense":
                x = cache[i]
                grads[i] = {"w": x.reshape(-1, x.shape[-1]).T @ g.reshape(-1, g.shape[-1]),
                            "b": g.reshape(-1, g.shape[-1]).sum(axis=0)}
                g = g @ p["w"].T
            elif spec.kind == "conv1d":
                win = cache[i]
                pad = (spec.kernel - 1) // 2
                grads[i] = {"w": np.einsum("btcj,bto->jco", win, g),
                            "b": g.sum(axis=(0, 1))}
                gwin = sliding_window_view(_pad_time(g, pad), spec.kernel, axis=1)
                g = np.einsum("btoj,jco->btc", gwin, p["w"][::-1])
            elif spec.kind == "sigmoid":
                y = cache[i]
                grads[i] = {}
                g = g * y * (1.0 - y)
            else:  # flatten
                grads[i] = {}
                g = g.reshape((g.shape[0],) + spec.in_shape)
        return grads, g

    def backward(self, x: np.ndarray, upstream: np.ndarray):
        """Gradients of sum(forward(x) * upstream) w.r.t. parameters and input.

        Returns (param_grads, input_grad); param_grads is a list of dicts
        aligned with ``specs``.
        """
        xb, squeeze = self._admit(x, self.in_shape, "backward input")
        gb, gsq = self._admit(upstream, self.out_shape, "backward upstream")
        if squeeze != gsq:
            raise ShapeError("backward: input and upstream batching disagree")
        _, cache = self._forward_cached(xb)
        grads, gx = self._backward_from_cache(cache, np.asarray(gb, dtype=np.float64))
        return grads, (gx[0] if squeeze else gx)


def zeros_like_params(params) -> list[dict]:
    return [{k: np.zeros_like(v) for k, v in p.items()} for p in params]


def add_params(acc, grads, scale: float = 1.0) -> None:
    """acc += scale * grads, layer by layer, in place."""
    for pa, pg in zip(acc, grads):
        for k in pg:
            pa[k] += scale * pg[k]
