"""Autoencoder construction, coding, and the training step contract."""

import numpy as np
import pytest

from mutualae.autoencoder import AeConfig, ConvAutoencoder, perturb_io
from mutualae.errors import ConfigError, ShapeError
from mutualae.rng import Rng


def small_config(**kw) -> AeConfig:
    base = dict(window=16, conv_channels=4, code_dim=5)
    base.update(kw)
    return AeConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError, match="window"):
        AeConfig(window=0).validate()
    with pytest.raises(ConfigError, match="code_dim"):
        AeConfig(code_dim=0).validate()
    with pytest.raises(ConfigError, match="kernel"):
        AeConfig(kernel=4).validate()
    with pytest.raises(ConfigError, match="lr"):
        AeConfig(lr=-1.0).validate()


def test_config_round_trip():
    cfg = small_config(code_sigma=0.2, lr=0.005)
    assert AeConfig.from_dict(cfg.to_dict()) == cfg


def test_shapes_through_the_stack():
    ae = ConvAutoencoder(small_config(), Rng(0))
    x = Rng(1).normal((16, 2))
    mu = ae.encode(x)
    assert mu.shape == (5,)
    assert np.all(mu > 0) and np.all(mu < 1)  # bottleneck is sigmoid-bounded
    out = ae.decode(mu)
    assert out.shape == (16, 2)
    batch = Rng(2).normal((7, 16, 2))
    assert ae.encode(batch).shape == (7, 5)
    assert ae.reconstruct(batch).shape == (7, 16, 2)


def test_encode_rejects_wrong_window():
    ae = ConvAutoencoder(small_config(), Rng(0))
    with pytest.raises(ShapeError):
        ae.encode(np.zeros((12, 2)))


def test_code_sampling_uses_sigma():
    ae = ConvAutoencoder(small_config(code_sigma=0.1), Rng(3))
    x = Rng(4).normal((9, 16, 2))
    mu = ae.encode(x)
    cs = ae.sample_code(mu, Rng(5))
    np.testing.assert_allclose(cs.z, cs.mu + 0.1 * cs.eps, atol=1e-12)
    np.testing.assert_array_equal(mu, cs.mu)


def test_sample_code_deterministic_given_rng():
    ae = ConvAutoencoder(small_config(), Rng(6))
    mu = ae.encode(Rng(7).normal((4, 16, 2)))
    a = ae.sample_code(mu, Rng(8))
    b = ae.sample_code(mu, Rng(8))
    np.testing.assert_array_equal(a.z, b.z)


def test_perturb_io_scale():
    x = np.zeros((50, 16, 2))
    y = perturb_io(x, 0.05, Rng(9))
    assert abs(y.std() - 0.05) < 0.01
    np.testing.assert_array_equal(perturb_io(x, 0.0, Rng(10)), x)


def test_train_step_reduces_loss():
    ae = ConvAutoencoder(small_config(lr=0.001, io_noise=0.0), Rng(11))
    batch = Rng(12).normal((32, 16, 2)) * 0.5
    root = Rng(13)
    first, _ = ae.train_step(batch, root.split("s", 0))
    for i in range(1, 200):
        last, _ = ae.train_step(batch, root.split("s", i))
    assert last < first * 0.9


def test_train_step_lambda_changes_update():
    batch = Rng(14).normal((16, 16, 2))
    prior = Rng(15).uniform(0.0, 1.0, (16, 5))
    a = ConvAutoencoder(small_config(), Rng(16))
    b = ConvAutoencoder(small_config(), Rng(16))
    assert a.checksum() == b.checksum()
    a.train_step(batch, Rng(17), lam=0.0, mu_prior=prior)
    b.train_step(batch, Rng(17), lam=5.0, mu_prior=prior)
    assert a.checksum() != b.checksum()


def test_train_step_zero_lambda_matches_no_prior():
    # with the alignment weight at zero, supplying a prior must not perturb
    # the update in any way (exact skip, not a multiply-by-zero)
    batch = Rng(18).normal((16, 16, 2))
    prior = Rng(19).uniform(0.0, 1.0, (16, 5))
    a = ConvAutoencoder(small_config(), Rng(20))
    b = ConvAutoencoder(small_config(), Rng(20))
    ra, align_a = a.train_step(batch, Rng(21), lam=0.0, mu_prior=prior)
    rb, align_b = b.train_step(batch, Rng(21))
    assert a.checksum() == b.checksum()
    assert ra == rb
    assert align_a > 0.0 and align_b == 0.0


def test_train_step_reports_pre_update_losses():
    batch = Rng(22).normal((8, 16, 2))
    ae = ConvAutoencoder(small_config(io_noise=0.0, code_sigma=0.0), Rng(23))
    before = ae.reconstruct(batch)
    expected = float(np.sum((before - batch) ** 2) / len(batch))
    recon, _ = ae.train_step(batch, Rng(24))
    assert recon == pytest.approx(expected, rel=1e-9)


def test_checksum_tracks_both_halves():
    ae = ConvAutoencoder(small_config(), Rng(25))
    c0 = ae.checksum()
    ae.decoder.params[-1]["b"][0] += 1e-9
    assert ae.checksum() != c0
