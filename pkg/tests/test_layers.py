"""Layer forward values against hand-computed oracles, plus gradient checks."""

import numpy as np
import pytest
from scipy.special import expit

from mutualae.errors import ShapeError
from mutualae.gradcheck import check_network, run_layer_suite
from mutualae.layers import Network, conv1d, dense, flatten, sigmoid
from mutualae.rng import Rng


def test_dense_forward_oracle():
    net = Network([dense(2, 3)], rng=Rng(0))
    net.params[0]["w"] = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    net.params[0]["b"] = np.array([0.5, -0.5, 0.0])
    out = net.forward(np.array([1.0, -1.0]))
    np.testing.assert_allclose(out, [1 - 4 + 0.5, 2 - 5 - 0.5, 3 - 6 + 0.0])


def test_conv1d_forward_oracle():
    # single channel, kernel 3, same padding: y[t] = w0*x[t-1] + w1*x[t] + w2*x[t+1]
    net = Network([conv1d(5, 1, 1, 3)], rng=Rng(0))
    net.params[0]["w"] = np.array([1.0, 2.0, 3.0]).reshape(3, 1, 1)
    net.params[0]["b"] = np.array([0.0])
    x = np.arange(5, dtype=float).reshape(5, 1)
    out = net.forward(x)[:, 0]
    expected = np.array(
        [2 * 0 + 3 * 1,                 # left edge, x[-1] padded with 0
         1 * 0 + 2 * 1 + 3 * 2,
         1 * 1 + 2 * 2 + 3 * 3,
         1 * 2 + 2 * 3 + 3 * 4,
         1 * 3 + 2 * 4]                 # right edge
    , dtype=float)
    np.testing.assert_allclose(out, expected)


def test_conv1d_matches_numpy_convolve():
    rng = Rng(1)
    net = Network([conv1d(16, 1, 1, 5)], rng=rng)
    x = rng.normal((16, 1))
    out = net.forward(x)[:, 0]
    w = net.params[0]["w"][:, 0, 0]
    ref = np.convolve(np.pad(x[:, 0], 2), w[::-1], mode="valid")
    np.testing.assert_allclose(out, ref + net.params[0]["b"][0], atol=1e-12)


def test_sigmoid_forward():
    net = Network([sigmoid((4,))], rng=Rng(0))
    x = np.array([-2.0, 0.0, 1.0, 30.0])
    np.testing.assert_allclose(net.forward(x), expit(x))


def test_flatten_round_trip():
    net = Network([flatten((4, 3), (12,)), flatten((12,), (4, 3))], rng=Rng(0))
    x = Rng(2).normal((4, 3))
    np.testing.assert_array_equal(net.forward(x), x)


def test_batch_matches_loop():
    rng = Rng(3)
    net = Network(
        [conv1d(8, 2, 3, 3), sigmoid((8, 3)), flatten((8, 3), (24,)), dense(24, 5)],
        rng=rng,
    )
    xs = rng.normal((7, 8, 2))
    batched = net.forward(xs)
    for i in range(7):
        np.testing.assert_allclose(batched[i], net.forward(xs[i]), atol=1e-12)


def test_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        Network([dense(3, 4), dense(5, 2)], rng=Rng(0))
    net = Network([dense(3, 4)], rng=Rng(0))
    with pytest.raises(ShapeError):
        net.forward(np.zeros(7))


def test_conv_kernel_must_be_odd():
    with pytest.raises(ShapeError):
        conv1d(8, 1, 1, 4)


def test_glorot_init_scale():
    net = Network([dense(100, 50)], rng=Rng(4))
    w = net.params[0]["w"]
    limit = np.sqrt(6.0 / 150)
    assert np.abs(w).max() <= limit
    assert np.abs(w).max() > 0.8 * limit  # actually fills the range
    assert np.all(net.params[0]["b"] == 0)


def test_copy_is_deep():
    net = Network([dense(2, 2)], rng=Rng(5))
    cp = net.copy()
    cp.params[0]["w"][0, 0] += 1.0
    assert net.params[0]["w"][0, 0] != cp.params[0]["w"][0, 0]
    assert net.checksum() != cp.checksum()


def test_checksum_stable():
    net = Network([dense(3, 3), sigmoid((3,))], rng=Rng(6))
    assert net.checksum() == net.copy().checksum()


def test_backward_gradcheck_mixed_stack():
    rng = Rng(7)
    net = Network(
        [conv1d(6, 2, 4, 3), sigmoid((6, 4)), flatten((6, 4), (24,)),
         dense(24, 3), sigmoid((3,))],
        rng=rng,
    )
    res = check_network(net, rng.normal((3, 6, 2)), rng.normal((3, 3)), "mixed")
    assert res.passed, f"max rel error {res.max_rel_error:.3g}"


def test_backward_input_gradient():
    # d/dx of sum(W x) is W summed over outputs
    net = Network([dense(3, 2)], rng=Rng(8))
    x = np.array([0.3, -0.7, 1.1])
    _, gx = net.backward(x, np.ones(2))
    np.testing.assert_allclose(gx, net.params[0]["w"].sum(axis=1), atol=1e-12)


def test_layer_suite_small():
    results = run_layer_suite(seeds=3)
    assert all(r.passed for r in results)
