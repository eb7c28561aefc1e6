"""Layer-level gradient checks against central finite differences."""

import numpy as np
import pytest

from simrod.detector import layers


def fd_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        ix = it.multi_index
        orig = x[ix]
        x[ix] = orig + h
        fp = f()
        x[ix] = orig - h
        fm = f()
        x[ix] = orig
        g[ix] = (fp - fm) / (2 * h)
        it.iternext()
    return g


def rel_err(a, b):
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b) / denom))


@pytest.mark.parametrize("stride,pad,k", [(1, 1, 3), (2, 1, 3), (1, 0, 1)])
def test_conv_gradients(stride, pad, k):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 3, 6, 6))
    w = rng.normal(size=(4, 3, k, k))
    b = rng.normal(size=4)
    proj = None

    def loss():
        out, _ = layers.conv_forward(x, w, b, stride=stride, pad=pad)
        return float((out * proj).sum())

    out, cache = layers.conv_forward(x, w, b, stride=stride, pad=pad)
    proj = np.cos(np.arange(out.size)).reshape(out.shape)  # fixed projection
    dx, dw, db = layers.conv_backward(cache, proj)
    assert rel_err(dx, fd_grad(loss, x)) < 1e-6
    assert rel_err(dw, fd_grad(loss, w)) < 1e-6
    assert rel_err(db, fd_grad(loss, b)) < 1e-6


def test_bn_gradients_training_mode():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 4, 5, 5))
    gamma = rng.uniform(0.5, 1.5, size=4)
    beta = rng.normal(size=4)
    proj = np.sin(np.arange(x.size)).reshape(x.shape)

    def loss():
        rm, rv = np.zeros(4), np.ones(4)
        out, _ = layers.bn_forward(x, gamma, beta, rm, rv, training=True)
        return float((out * proj).sum())

    rm, rv = np.zeros(4), np.ones(4)
    out, cache = layers.bn_forward(x, gamma, beta, rm, rv, training=True)
    dx, dgamma, dbeta = layers.bn_backward(cache, proj)
    assert rel_err(dx, fd_grad(loss, x)) < 1e-5
    assert rel_err(dgamma, fd_grad(loss, gamma)) < 1e-6
    assert rel_err(dbeta, fd_grad(loss, beta)) < 1e-6


def test_bn_running_stats_update_only_in_training():
    rng = np.random.default_rng(2)
    x = rng.normal(loc=2.0, scale=3.0, size=(4, 2, 6, 6))
    gamma, beta = np.ones(2), np.zeros(2)
    rm, rv = np.zeros(2), np.ones(2)
    layers.bn_forward(x, gamma, beta, rm, rv, training=True, momentum=0.1)
    assert not np.allclose(rm, 0.0) and not np.allclose(rv, 1.0)
    rm2, rv2 = rm.copy(), rv.copy()
    layers.bn_forward(x, gamma, beta, rm, rv, training=False)
    np.testing.assert_array_equal(rm, rm2)
    np.testing.assert_array_equal(rv, rv2)


def test_bn_eval_uses_running_stats():
    x = np.ones((1, 1, 2, 2)) * 5.0
    gamma, beta = np.ones(1), np.zeros(1)
    rm, rv = np.array([3.0]), np.array([4.0])
    out, _ = layers.bn_forward(x, gamma, beta, rm, rv, training=False, eps=0.0)
    np.testing.assert_allclose(out, (5.0 - 3.0) / 2.0)


def test_leaky_relu_gradient():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 3, 4, 4))
    proj = np.cos(np.arange(x.size)).reshape(x.shape)

    def loss():
        out, _ = layers.leaky_relu_forward(x, 0.1)
        return float((out * proj).sum())

    out, cache = layers.leaky_relu_forward(x, 0.1)
    dx = layers.leaky_relu_backward(cache, proj)
    assert rel_err(dx, fd_grad(loss, x)) < 1e-6
