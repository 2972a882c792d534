"""Finite-difference verification of the analytic gradients.

The numeric side is always a central difference with step 1e-5 in float64,
independent of the reverse-mode code it checks.  Component-wise relative
error uses max(|analytic|, |numeric|, floor) in the denominator so exact
zeros do not blow up the ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Network, conv1d, dense, flatten, sigmoid
from .rng import Rng

STEP = 1e-5
TOL = 1e-4
FLOOR = 1e-6


def relative_error(analytic: np.ndarray, numeric: np.ndarray,
                   floor: float = FLOOR) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numeric_param_grads(net: Network, x: np.ndarray, scalar_fn,
                        step: float = STEP):
    """Central differences of scalar_fn(net, x) w.r.t. every parameter."""
    grads = []
    for p in net.params:
        gp = {}
        for k, arr in p.items():
            g = np.zeros_like(arr)
            flat = arr.reshape(-1)
            gflat = g.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + step
                hi = scalar_fn(net, x)
                flat[j] = orig - step
                lo = scalar_fn(net, x)
                flat[j] = orig
                gflat[j] = (hi - lo) / (2.0 * step)
            gp[k] = g
        grads.append(gp)
    return grads


def numeric_input_grad(net: Network, x: np.ndarray, scalar_fn,
                       step: float = STEP) -> np.ndarray:
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + step
        hi = scalar_fn(net, x)
        flat[j] = orig - step
        lo = scalar_fn(net, x)
        flat[j] = orig
        gflat[j] = (hi - lo) / (2.0 * step)
    return g


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    n_components: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error < TOL


def check_network(net: Network, x: np.ndarray, u: np.ndarray,
                  name: str = "net") -> GradCheckResult:
    """Compare backward() against differences of F = sum(forward * u)."""

    def scalar(n, xx):
        return float(np.sum(n.forward(xx) * u))

    grads, gx = net.backward(x, u)
    worst = 0.0
    count = 0
    num = numeric_param_grads(net, x, scalar)
    for ga, gn in zip(grads, num):
        for k in gn:
            err = relative_error(ga[k], gn[k])
            worst = max(worst, float(err.max(initial=0.0)))
            count += int(err.size)
    nx = numeric_input_grad(net, x, scalar)
    err = relative_error(gx, nx)
    worst = max(worst, float(err.max()))
    count += int(err.size)
    return GradCheckResult(name, worst, count)


def random_small_net(rng: Rng, max_layers: int = 4, max_params: int = 200) -> Network:
    """A randomly composed stack mixing all four layer kinds."""
    width = int(rng.integers(4, 9))
    ch = int(rng.integers(1, 4))
    specs = [conv1d(width, ch, ch, 3), sigmoid((width, ch))]
    n_extra = int(rng.integers(0, max_layers - 1))
    for _ in range(n_extra):
        if rng.uniform(0.0, 1.0) < 0.5:
            specs.append(conv1d(width, ch, ch, 3))
        else:
            specs.append(sigmoid((width, ch)))
    out_dim = int(rng.integers(2, 5))
    specs.append(flatten((width, ch), (width * ch,)))
    specs.append(dense(width * ch, out_dim))
    net = Network(specs, rng=rng.split("init"))
    while net.n_params > max_params:
        specs = specs[:1] + specs[-2:]
        net = Network(specs, rng=rng.split("init"))
    return net


def run_layer_suite(seeds: int = 20, master_seed: int = 2024) -> list[GradCheckResult]:
    """Gradient checks for each layer kind alone plus random compositions."""
    results = []
    root = Rng(master_seed)
    for s in range(seeds):
        rng = root.split("gradcheck", s)

        nets = {
            "dense": Network([dense(5, 3)], rng=rng.split("dense")),
            "conv1d": Network([conv1d(7, 2, 3, 3)], rng=rng.split("conv")),
            "sigmoid": Network([sigmoid((6,))], rng=rng.split("sig")),
            "flatten": Network([flatten((4, 2), (8,))], rng=rng.split("flat")),
            "composed": random_small_net(rng.split("mix")),
        }
        for name, net in nets.items():
            x = rng.split(name, "x").normal(net.in_shape)
            u = rng.split(name, "u").normal(net.out_shape)
            results.append(check_network(net, x, u, name=f"{name}[seed {s}]"))
    return results
