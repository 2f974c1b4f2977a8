"""Layer-level correctness: finite-difference gradients and a naive forward oracle."""

import numpy as np
import pytest

from chaordic.net.layers import Conv2D, Dense, Flatten, MaxPool2x2, ReLU, Softmax
from chaordic.net.network import Network, NetworkConfig, ShapeMismatch

from gradcheck import (
    TOL,
    max_rel_err,
    pool_safe_input,
    random_small_shape,
    safe_relu_input,
)


def check_layer(layer, x, rng):
    assert max_rel_err(layer, x, rng) < TOL


N_TRIALS = 20  # per layer type here; the acceptance suite runs >= 100 total


def test_conv2d_gradients():
    rng = np.random.default_rng(1)
    for _ in range(N_TRIALS):
        shape = random_small_shape(rng)
        layer = Conv2D(shape[3], int(rng.integers(1, 4)), rng, dtype=np.float64)
        check_layer(layer, rng.standard_normal(shape), rng)


def test_dense_gradients():
    rng = np.random.default_rng(2)
    for _ in range(N_TRIALS):
        n_in, n_out = int(rng.integers(1, 12)), int(rng.integers(1, 8))
        layer = Dense(n_in, n_out, rng, dtype=np.float64)
        check_layer(layer, rng.standard_normal((int(rng.integers(1, 4)), n_in)), rng)


def test_relu_gradients():
    rng = np.random.default_rng(3)
    for _ in range(N_TRIALS):
        check_layer(ReLU(), safe_relu_input(rng, random_small_shape(rng)), rng)


def test_maxpool_gradients():
    rng = np.random.default_rng(4)
    for _ in range(N_TRIALS):
        check_layer(MaxPool2x2(), pool_safe_input(rng, random_small_shape(rng)), rng)


def test_flatten_gradients():
    rng = np.random.default_rng(5)
    for _ in range(N_TRIALS):
        check_layer(Flatten(), rng.standard_normal(random_small_shape(rng)), rng)


def test_softmax_gradients():
    rng = np.random.default_rng(6)
    for _ in range(N_TRIALS):
        shape = (int(rng.integers(1, 4)), int(rng.integers(2, 12)))
        check_layer(Softmax(), rng.standard_normal(shape), rng)


# -- naive forward oracle ------------------------------------------------------


def oracle_conv(x, w, b):
    bsz, h, wd, cin = x.shape
    cout = w.shape[3]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    out = np.zeros((bsz, h, wd, cout))
    for n in range(bsz):
        for i in range(h):
            for j in range(wd):
                for o in range(cout):
                    acc = b[o]
                    for ki in range(3):
                        for kj in range(3):
                            for c in range(cin):
                                acc += xp[n, i + ki, j + kj, c] * w[ki, kj, c, o]
                    out[n, i, j, o] = acc
    return out


def oracle_pool(x):
    bsz, h, w, c = x.shape
    out = np.zeros((bsz, h // 2, w // 2, c))
    for n in range(bsz):
        for i in range(h // 2):
            for j in range(w // 2):
                for ch in range(c):
                    out[n, i, j, ch] = x[n, 2 * i:2 * i + 2, 2 * j:2 * j + 2, ch].max()
    return out


def oracle_softmax(x):
    out = np.zeros_like(x)
    for n in range(x.shape[0]):
        e = np.exp(x[n] - x[n].max())
        out[n] = e / e.sum()
    return out


def test_network_forward_matches_scalar_oracle():
    cfg = NetworkConfig(
        input_shape=(8, 8, 1),
        layers=(
            {"type": "conv2d", "out_channels": 3},
            {"type": "relu"},
            {"type": "maxpool"},
            {"type": "flatten"},
            {"type": "dense", "units": 11},
            {"type": "softmax"},
        ),
    )
    net = Network(cfg, seed=9, dtype=np.float64)
    rng = np.random.default_rng(10)
    x = rng.standard_normal((2, 8, 8, 1))
    got = net.forward_batch(x)

    conv, dense = net.layers[0], net.layers[4]
    h = oracle_conv(x, conv.w, conv.b)
    h = np.maximum(h, 0.0)
    h = oracle_pool(h)
    h = h.reshape(2, -1)
    h = h @ dense.w + dense.b
    expected = oracle_softmax(h)
    assert np.max(np.abs(got - expected)) < 1e-6


def test_softmax_stability_extreme_logits():
    s = Softmax()
    for scale in (1e3, -1e3):
        out = s.forward(np.array([[scale, 0.0, -scale, scale]]))
        assert np.all(np.isfinite(out))
        assert abs(out.sum() - 1.0) < 1e-6


def test_forward_probabilities_normalized():
    net = Network(seed=0)
    rng = np.random.default_rng(1)
    pred = net.forward(rng.random((128, 128, 1)).astype(np.float32))
    assert abs(float(pred.probs.sum()) - 1.0) < 1e-6
    assert pred.probs.shape == (11,)


def test_zero_weights_give_uniform_distribution():
    net = Network(seed=0)
    for p in net.params():
        p[...] = 0.0
    pred = net.forward(np.random.default_rng(2).random((128, 128, 1)).astype(np.float32))
    assert np.allclose(pred.probs, 1.0 / 11, atol=1e-7)


def test_shape_mismatch_names_shapes():
    net = Network(seed=0)
    with pytest.raises(ShapeMismatch, match=r"\(128, 128, 1\)"):
        net.forward(np.zeros((64, 64, 1), dtype=np.float32))


def test_argmax_ties_break_low():
    probs = np.array([0.2, 0.3, 0.3, 0.2])
    assert int(np.argmax(probs)) == 1
