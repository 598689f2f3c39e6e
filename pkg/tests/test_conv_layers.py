import itertools

import numpy as np
import pytest
from scipy.special import expit

import oracles
from selfsup_labels.autoencoder.layers import Conv1dLayer, conv1d_backward, conv1d_forward
from selfsup_labels.errors import ShapeMismatch


def _layer(kind, cin, cout, k, act, rng, bias_scale=0.1):
    layer = Conv1dLayer.init(kind, cin, cout, k, act, rng)
    layer.biases = rng.normal(0, bias_scale, cout)
    return layer


def test_identity_kernel():
    w = np.zeros((1, 1, 3))
    w[0, 0, 1] = 1.0
    layer = Conv1dLayer("conv", 1, 1, 3, w, np.zeros(1), "linear")
    x = np.arange(10.0)[None]
    np.testing.assert_array_equal(conv1d_forward(x, layer), x)


def test_zero_weights_sigmoid_is_constant():
    layer = Conv1dLayer("conv", 2, 3, 3, np.zeros((3, 2, 3)), np.array([0.3, -1.0, 2.0]), "sigmoid")
    out = conv1d_forward(np.random.default_rng(0).normal(size=(2, 12)), layer)
    np.testing.assert_allclose(out, expit(np.array([0.3, -1.0, 2.0]))[:, None] * np.ones((1, 12)))


@pytest.mark.parametrize("kind", ["conv", "transposed_conv"])
@pytest.mark.parametrize("k", [1, 3, 5])
def test_forward_matches_direct_summation(kind, k, rng):
    layer = _layer(kind, 3, 4, k, "linear", rng)
    x = rng.normal(size=(3, 17))
    want = oracles.conv_direct(x, layer.weights, layer.biases, transposed=(kind == "transposed_conv"))
    np.testing.assert_allclose(conv1d_forward(x, layer), want, atol=1e-10)


def test_batch_matches_single(rng):
    layer = _layer("conv", 2, 3, 3, "relu", rng)
    xb = rng.normal(size=(4, 2, 9))
    out = conv1d_forward(xb, layer)
    for i in range(4):
        np.testing.assert_array_equal(out[i], conv1d_forward(xb[i], layer))


def test_shape_errors(rng):
    layer = _layer("conv", 2, 3, 3, "relu", rng)
    with pytest.raises(ShapeMismatch):
        conv1d_forward(rng.normal(size=(3, 9)), layer)
    with pytest.raises(ShapeMismatch):
        conv1d_backward(layer, rng.normal(size=(2, 9)), np.zeros((3, 8)))
    with pytest.raises(ShapeMismatch):
        Conv1dLayer("conv", 2, 3, 3, np.zeros((3, 3, 3)), np.zeros(3))
    with pytest.raises(ValueError):
        Conv1dLayer("conv", 1, 1, 2, np.zeros((1, 1, 2)), np.zeros(1))


def test_zero_upstream_gives_zero_gradients(rng):
    layer = _layer("transposed_conv", 2, 3, 3, "sigmoid", rng)
    dx, dw, db = conv1d_backward(layer, rng.normal(size=(2, 8)), np.zeros((3, 8)))
    assert not dx.any() and not dw.any() and not db.any()


def test_identity_layer_input_gradient(rng):
    w = np.zeros((2, 2, 3))
    w[0, 0, 1] = w[1, 1, 1] = 1.0
    layer = Conv1dLayer("conv", 2, 2, 3, w, np.zeros(2), "linear")
    g = rng.normal(size=(2, 8))
    dx, _, _ = conv1d_backward(layer, rng.normal(size=(2, 8)), g)
    np.testing.assert_array_equal(dx, g)


def _rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


def _fd_check(layer, x, upstream, eps=1e-5):
    def objective():
        return float(np.sum(conv1d_forward(x, layer) * upstream))

    dx, dw, db = conv1d_backward(layer, x, upstream)
    for arr, grad in ((layer.weights, dw), (layer.biases, db), (x, dx)):
        num = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            keep = arr[idx]
            arr[idx] = keep + eps
            up = objective()
            arr[idx] = keep - eps
            down = objective()
            arr[idx] = keep
            num[idx] = (up - down) / (2 * eps)
        assert _rel_err(grad, num) < 1e-4


@pytest.mark.parametrize("kind, act", list(itertools.product(["conv", "transposed_conv"],
                                                             ["relu", "sigmoid", "linear"])))
def test_gradients_match_finite_differences(kind, act):
    # 4 checked trials per combination, 24 in total
    checked = 0
    for trial in range(40):
        if checked == 4:
            break
        rng = np.random.default_rng(100 * trial + len(kind) + len(act))
        layer = _layer(kind, 2, 3, 3, act, rng, bias_scale=0.5)
        x = rng.normal(size=(2, 8))
        if act == "relu":
            # keep pre-activations away from the kink so differences stay smooth
            z = conv1d_forward(x, Conv1dLayer(kind, 2, 3, 3, layer.weights, layer.biases, "linear"))
            if np.min(np.abs(z)) < 1e-3:
                continue
        _fd_check(layer, x, rng.normal(size=(3, 8)))
        checked += 1
    assert checked == 4
