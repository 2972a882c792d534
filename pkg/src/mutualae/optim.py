"""ADAM with bias correction over layer-aligned parameter lists."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError
from .layers import zeros_like_params


@dataclass
class AdamState:
    """Moment accumulators mirroring the parameter structure.

    beta1/beta2/eps are the de-facto defaults; the learning rate is the
    only knob the training recipes vary (0.01 for the autoencoders, 0.1
    for the translators).
    """

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_init(params, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    return AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
                     m=zeros_like_params(params), v=zeros_like_params(params))


def adam_step(state: AdamState, params, grads, context: str = "") -> None:
    """One ADAM update, in place on ``params`` and ``state``.

    Raises TrainingError on non-finite gradients so a training loop can
    surface the epoch/batch where things went wrong.
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        for k in g:
            gk = g[k]
            if not np.all(np.isfinite(gk)):
                where = f" ({context})" if context else ""
                raise TrainingError(
                    f"non-finite gradient in layer {i} parameter {k!r}{where}"
                )
            m = state.m[i][k]
            v = state.v[i][k]
            m *= b1
            m += (1.0 - b1) * gk
            v *= b2
            v += (1.0 - b2) * gk * gk
            p[k] -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
