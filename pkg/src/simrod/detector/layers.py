"""Conv / BatchNorm / LeakyReLU with explicit forward and backward passes.

Arrays are channels-first (B, C, H, W). Each forward returns (out, cache);
each backward takes (cache, dout) and returns the input gradient plus any
parameter gradients. No autograd: gradients are hand-derived and checked
against finite differences in the tests.
"""

from __future__ import annotations

import numpy as np

from .. import _kernels


def conv_forward(x, w, b=None, stride=1, pad=0):
    """w: (OC, IC, k, k); returns (B, OC, OH, OW). 1x1 stride-1 convs skip
    the patch gather entirely."""
    oc, ic, k, _ = w.shape
    bsz = x.shape[0]
    wflat = w.reshape(oc, ic * k * k)
    if k == 1 and stride == 1 and pad == 0:
        cols = np.ascontiguousarray(x.transpose(0, 2, 3, 1))  # (B,H,W,IC)
    else:
        cols = _kernels.im2col(x, k, stride, pad)
    oh, ow = cols.shape[1], cols.shape[2]
    out = cols.reshape(-1, wflat.shape[1]) @ wflat.T
    out = out.reshape(bsz, oh, ow, oc)
    if b is not None:
        out = out + b
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    cache = (cols, w, x.shape, stride, pad, b is not None)
    return out, cache


def conv_backward(cache, dout):
    """Returns (dx, dw, db); db is None for bias-free convs."""
    cols, w, x_shape, stride, pad, has_bias = cache
    oc, ic, k, _ = w.shape
    d2 = np.ascontiguousarray(dout.transpose(0, 2, 3, 1)).reshape(-1, oc)
    cols2 = cols.reshape(-1, cols.shape[3])
    dw = (d2.T @ cols2).reshape(w.shape)
    db = d2.sum(axis=0) if has_bias else None
    dcols = (d2 @ w.reshape(oc, -1)).reshape(cols.shape)
    if k == 1 and stride == 1 and pad == 0:
        dx = np.ascontiguousarray(dcols.transpose(0, 3, 1, 2))
    else:
        dx = _kernels.col2im(dcols, x_shape[2], x_shape[3], k, stride, pad)
    return dx, dw, db


def bn_forward(x, gamma, beta, running_mean, running_var, training,
               momentum=0.1, eps=1e-5):
    """Per-channel batch norm. In training mode the batch statistics are used
    and the running buffers are updated in place; in eval mode the running
    buffers are read-only."""
    if training:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mean = running_mean
        var = running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    cache = (xhat, inv_std, gamma, training)
    return out, cache


def bn_backward(cache, dout):
    """Returns (dx, dgamma, dbeta)."""
    xhat, inv_std, gamma, training = cache
    dgamma = (dout * xhat).sum(axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    dxhat = dout * gamma[None, :, None, None]
    if not training:
        return dxhat * inv_std[None, :, None, None], dgamma, dbeta
    n = dout.shape[0] * dout.shape[2] * dout.shape[3]
    sum_dxhat = dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
    sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None]
    dx = (inv_std[None, :, None, None] / n) * (
        n * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
    return dx.astype(dout.dtype, copy=False), dgamma, dbeta


def leaky_relu_forward(x, slope=0.1):
    mask = x > 0
    out = np.where(mask, x, slope * x)
    return out, (mask, slope)


def leaky_relu_backward(cache, dout):
    mask, slope = cache
    return np.where(mask, dout, slope * dout)
