"""Convolutional autoencoder with a stochastic sigmoid bottleneck.

The encoder maps a (window, 2)-shaped slice of the paired series to a
code mean mu(x) in (0,1)^code_dim; codes are sampled as z = mu + sigma*eps
(reparametrized, sigma fixed), and a deterministic decoder maps z back to
a reconstruction of both channels.  During training, independent Gaussian
perturbations of amplitude ``io_noise`` are applied to the input and to
the reconstruction target.

Encoder stack:  conv1d(2->c, k) -> sigmoid -> conv1d(c->c, k) -> sigmoid
                -> flatten -> dense(W*c -> code_dim) -> sigmoid
Decoder stack:  dense(code_dim -> W*c) -> sigmoid -> unflatten
                -> conv1d(c->c, k) -> sigmoid -> conv1d(c->2, k)   (linear out)

Two instances paired in a dialogue must differ: different conv channel
counts and code_dim_1 > code_dim_2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .layers import Network, conv1d, dense, flatten, sigmoid
from .optim import AdamState, adam_init, adam_step
from .rng import Rng
from .tensors import check_finite

ADAM_LR = 0.01


@dataclass(frozen=True)
class AeConfig:
    """Architecture and noise settings for one autoencoder."""

    window: int = 32
    channels: int = 2
    conv_channels: int = 32
    kernel: int = 5
    code_dim: int = 8
    code_sigma: float = 0.1
    io_noise: float = 0.05
    lr: float = ADAM_LR

    def validate(self, path: str = "ae") -> "AeConfig":
        if self.code_dim < 1:
            raise ConfigError(f"{path}.code_dim: must be >= 1")
        if self.code_sigma < 0:
            raise ConfigError(f"{path}.code_sigma: must be >= 0")
        if self.io_noise < 0:
            raise ConfigError(f"{path}.io_noise: must be >= 0")
        if self.lr <= 0:
            raise ConfigError(f"{path}.lr: must be > 0")
        if self.window < self.kernel:
            raise ConfigError(f"{path}.window: must be >= kernel width")
        if self.kernel % 2 == 0 or self.kernel < 1:
            raise ConfigError(f"{path}.kernel: must be odd and positive")
        if self.code_dim >= self.window * self.channels:
            raise ConfigError(
                f"{path}.code_dim: {self.code_dim} is not undercomplete for "
                f"a {self.window}x{self.channels} input"
            )
        return self

    def to_dict(self) -> dict:
        return {
            "window": self.window, "channels": self.channels,
            "conv_channels": self.conv_channels, "kernel": self.kernel,
            "code_dim": self.code_dim, "code_sigma": self.code_sigma,
            "io_noise": self.io_noise, "lr": self.lr,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AeConfig":
        return cls(**d).validate()


@dataclass
class CodeSample:
    """One stochastic utterance: z = mu + sigma * eps with the draw kept."""

    mu: np.ndarray
    z: np.ndarray
    sigma: float
    eps: np.ndarray


def perturb_io(x: np.ndarray, amplitude: float, rng: Rng) -> np.ndarray:
    """Elementwise Gaussian perturbation used on inputs and targets."""
    if amplitude < 0:
        raise ValueError("perturbation amplitude must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    if amplitude == 0:
        return x.copy()
    return x + amplitude * rng.normal(x.shape)


class ConvAutoencoder:
    """Paired encoder/decoder with its own optimizer state."""

    def __init__(self, config: AeConfig, rng: Rng):
        self.config = config.validate()
        w, ch, c, k, dz = (config.window, config.channels, config.conv_channels,
                           config.kernel, config.code_dim)
        enc = [
            conv1d(w, ch, c, k), sigmoid((w, c)),
            conv1d(w, c, c, k), sigmoid((w, c)),
            flatten((w, c), (w * c,)),
            dense(w * c, dz), sigmoid((dz,)),
        ]
        dec = [
            dense(dz, w * c), sigmoid((w * c,)),
            flatten((w * c,), (w, c)),
            conv1d(w, c, c, k), sigmoid((w, c)),
            conv1d(w, c, ch, k),
        ]
        self.encoder = Network(enc, rng=rng.split("encoder"))
        self.decoder = Network(dec, rng=rng.split("decoder"))
        self.opt_enc: AdamState = adam_init(self.encoder.params, lr=config.lr)
        self.opt_dec: AdamState = adam_init(self.decoder.params, lr=config.lr)

    # -- inference ----------------------------------------------------------

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Deterministic code mean mu(x); components lie in (0,1)."""
        return self.encoder.forward(x)

    def sample_code(self, mu: np.ndarray, rng: Rng,
                    sigma: float | None = None) -> CodeSample:
        if sigma is None:
            sigma = self.config.code_sigma
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        eps = rng.normal(np.shape(mu))
        z = mu + sigma * eps
        return CodeSample(mu=np.asarray(mu), z=z, sigma=sigma, eps=eps)

    def decode(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        want = self.decoder.in_shape
        if z.shape != want and (z.ndim != 2 or z.shape[1:] != want):
            raise ShapeError(f"decode: expected code length {want[0]}, got {z.shape}")
        return self.decoder.forward(z)

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        """Denoised reconstruction through the code mean (no sampling)."""
        return self.decode(self.encode(x))

    def checksum(self) -> str:
        return self.encoder.checksum() + self.decoder.checksum()

    # -- training -----------------------------------------------------------

    def train_step(self, batch: np.ndarray, rng: Rng, lam: float = 0.0,
                   mu_prior: np.ndarray | None = None, context: str = ""):
        """One ADAM step on the (listener) loss over a batch.

        Per sample the loss is sum((x_target - x_rec)^2) plus, when ``lam``
        is nonzero, lam * sum((mu - mu_prior)^2); the batch takes the mean.
        Draw order from ``rng`` is fixed: input perturbation, target
        perturbation, code noise.  Returns (recon_loss, align_loss) as
        batch means.
        """
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim == 2:
            batch = batch[None]
        check_finite(batch, "training batch")
        n = batch.shape[0]

        noise = self.config.io_noise
        x_in = perturb_io(batch, noise, rng)
        x_target = perturb_io(batch, noise, rng)

        mu, enc_cache = self.encoder._forward_cached(x_in)
        eps = rng.normal(mu.shape)
        z = mu + self.config.code_sigma * eps
        x_rec, dec_cache = self.decoder._forward_cached(z)

        diff = x_rec - x_target
        recon = float(np.sum(diff * diff) / n)

        dec_grads, gz = self.decoder._backward_from_cache(dec_cache, (2.0 / n) * diff)
        align = 0.0
        gmu = gz
        if lam != 0.0:
            if mu_prior is None:
                raise ValueError("alignment weight set but no prior means given")
            delta = mu - mu_prior
            align = float(np.sum(delta * delta) / n)
            gmu = gz + (2.0 * lam / n) * delta
        elif mu_prior is not None:
            delta = mu - mu_prior
            align = float(np.sum(delta * delta) / n)
        enc_grads, _ = self.encoder._backward_from_cache(enc_cache, gmu)

        adam_step(self.opt_dec, self.decoder.params, dec_grads, context=context)
        adam_step(self.opt_enc, self.encoder.params, enc_grads, context=context)
        return recon, align
