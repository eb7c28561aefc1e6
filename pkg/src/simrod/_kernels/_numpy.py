"""Pure-numpy implementations of the hot kernels.

These mirror the Cython extension in ``_ext.pyx`` and are selected at import
time when the extension is unavailable (or when SIMROD_PURE_PYTHON=1).
Accumulation order in ``col2im`` is fixed (kernel offsets ascending) so both
backends produce bitwise-identical results.
"""

import numpy as np


def im2col(x, k, stride, pad):
    """Gather k*k patches of x (B,C,H,W) into columns (B,OH,OW,C*k*k)."""
    b, c, h, w = x.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((b, c, k, k, oh, ow), dtype=x.dtype)
    for ki in range(k):
        for kj in range(k):
            cols[:, :, ki, kj] = x[:, :, ki:ki + stride * oh:stride,
                                   kj:kj + stride * ow:stride]
    return np.ascontiguousarray(cols.transpose(0, 4, 5, 1, 2, 3)).reshape(
        b, oh, ow, c * k * k)


def col2im(cols, h, w, k, stride, pad):
    """Scatter-add columns (B,OH,OW,C*k*k) back to an image (B,C,H,W).

    Inverse of the gather in :func:`im2col`; overlapping patches accumulate.
    """
    b, oh, ow, ckk = cols.shape
    c = ckk // (k * k)
    cols6 = cols.reshape(b, oh, ow, c, k, k).transpose(0, 3, 4, 5, 1, 2)
    hp, wp = h + 2 * pad, w + 2 * pad
    out = np.zeros((b, c, hp, wp), dtype=cols.dtype)
    for ki in range(k):
        for kj in range(k):
            out[:, :, ki:ki + stride * oh:stride,
                kj:kj + stride * ow:stride] += cols6[:, :, ki, kj]
    if pad:
        out = out[:, :, pad:hp - pad, pad:wp - pad]
    return np.ascontiguousarray(out)


def nms_suppress(boxes, iou_threshold):
    """Greedy suppression over corner boxes (N,4) already sorted by score.

    Returns a uint8 mask, 1 = kept. A box is removed when its IoU with an
    earlier kept box strictly exceeds the threshold.
    """
    n = boxes.shape[0]
    keep = np.ones(n, dtype=np.uint8)
    if n == 0:
        return keep
    x1, y1, x2, y2 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    areas = (x2 - x1) * (y2 - y1)
    for i in range(n):
        if not keep[i]:
            continue
        rest = np.nonzero(keep[i + 1:])[0] + i + 1
        if rest.size == 0:
            continue
        iw = np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest])
        ih = np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest])
        inter = np.maximum(iw, 0.0) * np.maximum(ih, 0.0)
        iou = inter / (areas[i] + areas[rest] - inter)
        keep[rest[iou > iou_threshold]] = 0
    return keep
