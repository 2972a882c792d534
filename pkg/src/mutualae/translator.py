"""Per-sample code dictionaries between the two autoencoders' latents.

A translator is a deliberately unsmooth regressor: a single wide sigmoid
hidden layer fitted by plain MSE with no regularization, so that isolated
code pairs (the sparsely populated regions between clusters) are memorized
instead of averaged away.  One dictionary per direction; both are refitted
from a fresh, complete set of mean-code pairs after every training epoch,
warm-starting from the previous fit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .autoencoder import ConvAutoencoder
from .errors import DataError, ShapeError
from .layers import Network, dense, sigmoid
from .optim import AdamState, adam_init, adam_step
from .rng import Rng

HIDDEN_FACTOR = 16
ADAM_LR = 0.1
FIT_EPOCHS = 10


@dataclass
class CodePairSet:
    """Aligned mean codes (z1[t], z2[t]), exactly one pair per sample."""

    z1: np.ndarray
    z2: np.ndarray

    def __post_init__(self):
        self.z1 = np.asarray(self.z1, dtype=np.float64)
        self.z2 = np.asarray(self.z2, dtype=np.float64)
        if self.z1.ndim != 2 or self.z2.ndim != 2:
            raise ShapeError("code pairs must be 2-d (samples, code_dim)")
        if len(self.z1) != len(self.z2):
            raise ShapeError("code pair arrays differ in sample count")

    def __len__(self) -> int:
        return len(self.z1)

    def source(self, direction: str) -> np.ndarray:
        return self.z1 if direction == "1to2" else self.z2

    def target(self, direction: str) -> np.ndarray:
        return self.z2 if direction == "1to2" else self.z1


@dataclass
class Translator:
    """Dictionary network for one direction, stamped with its fit epoch."""

    direction: str          # "1to2" or "2to1"
    net: Network
    stamp: int = -1
    fit_mse: float = float("nan")
    opt: AdamState = field(default=None, repr=False)

    def __post_init__(self):
        if self.direction not in ("1to2", "2to1"):
            raise ValueError(f"direction must be '1to2' or '2to1', got {self.direction!r}")

    @property
    def in_dim(self) -> int:
        return self.net.in_shape[0]

    @property
    def out_dim(self) -> int:
        return self.net.out_shape[0]

    def checksum(self) -> str:
        return self.net.checksum()


def collect_pairs(ae1: ConvAutoencoder, ae2: ConvAutoencoder,
                  windows1: np.ndarray, windows2: np.ndarray | None = None) -> CodePairSet:
    """Encode every sample with both AEs (clean inputs, mean codes only).

    ``windows2`` defaults to ``windows1`` when both AEs look at the same
    series; in paired-context runs each AE encodes its own view, aligned
    by sample index.
    """
    windows1 = np.asarray(windows1, dtype=np.float64)
    windows2 = windows1 if windows2 is None else np.asarray(windows2, dtype=np.float64)
    if len(windows1) == 0:
        raise DataError("cannot collect code pairs from an empty dataset")
    if len(windows1) != len(windows2):
        raise DataError("the two views must have the same number of samples")
    return CodePairSet(z1=ae1.encode(windows1), z2=ae2.encode(windows2))


def _batch_slices(n: int, batches: int):
    sizes = np.full(batches, n // batches)
    sizes[: n % batches] += 1
    edges = np.concatenate([[0], np.cumsum(sizes)])
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def fit_translator(pairs: CodePairSet, direction: str, rng: Rng | None = None,
                   prev: Translator | None = None, hidden: int | None = None,
                   lr: float = ADAM_LR, epochs: int = FIT_EPOCHS,
                   batches: int = 10, stamp: int = -1) -> Translator:
    """Fit (or incrementally refit) the dictionary for one direction.

    With ``prev`` given, training continues from the previous weights and
    optimizer state on the new pair set.  Every sample weighs equally in
    the MSE; nothing discourages memorization.
    """
    if len(pairs) < 2:
        raise DataError("need at least 2 code pairs to fit a translator")
    src = pairs.source(direction)
    tgt = pairs.target(direction)
    if np.allclose(src, src[0]) and np.allclose(tgt, tgt[0]):
        warnings.warn("all code pairs identical; translator fit is degenerate",
                      stacklevel=2)

    if prev is not None:
        tr = Translator(direction=direction, net=prev.net.copy(), stamp=stamp,
                        opt=AdamState(lr=prev.opt.lr, beta1=prev.opt.beta1,
                                      beta2=prev.opt.beta2, eps=prev.opt.eps,
                                      step=prev.opt.step,
                                      m=[{k: v.copy() for k, v in p.items()} for p in prev.opt.m],
                                      v=[{k: v.copy() for k, v in p.items()} for p in prev.opt.v]))
    else:
        if rng is None:
            raise ValueError("fresh translator fit needs an rng")
        d_in, d_out = src.shape[1], tgt.shape[1]
        width = hidden if hidden is not None else HIDDEN_FACTOR * max(d_in, d_out)
        net = Network([dense(d_in, width), sigmoid((width,)), dense(width, d_out)],
                      rng=rng)
        tr = Translator(direction=direction, net=net, stamp=stamp,
                        opt=adam_init(net.params, lr=lr))

    n = len(pairs)
    slices = _batch_slices(n, min(batches, n))
    for epoch in range(epochs):
        for sl in slices:
            xb, yb = src[sl], tgt[sl]
            pred, cache = tr.net._forward_cached(xb)
            diff = pred - yb
            grads, _ = tr.net._backward_from_cache(cache, (2.0 / len(xb)) * diff)
            adam_step(tr.opt, tr.net.params, grads,
                      context=f"translator {direction} epoch {epoch}")
    residual = tr.net.forward(src) - tgt
    tr.fit_mse = float(np.mean(residual * residual))
    return tr


def translate(tr: Translator, z: np.ndarray) -> np.ndarray:
    """Apply the dictionary; deterministic, accepts a single code or a batch."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != tr.in_dim:
        raise ShapeError(
            f"translator {tr.direction} expects codes of length {tr.in_dim}, "
            f"got {z.shape}"
        )
    return tr.net.forward(z)
