# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython implementations of the hot kernels (im2col / col2im / NMS).

Kept numerically in lockstep with ``_numpy.py``: same gather layout and the
same per-element accumulation order, so outputs are bitwise identical.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef fused floating:
    float
    double


def im2col(floating[:, :, :, ::1] x, int k, int stride, int pad):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - k) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * pad - k) // stride + 1
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out_arr = np.empty((b, oh, ow, c * k * k), dtype=dtype)
    cdef floating[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t bb, oi, oj, cc, ki, kj, y, xx
    cdef floating v
    for bb in range(b):
        for oi in range(oh):
            for oj in range(ow):
                for cc in range(c):
                    for ki in range(k):
                        y = oi * stride + ki - pad
                        for kj in range(k):
                            xx = oj * stride + kj - pad
                            if 0 <= y < h and 0 <= xx < w:
                                v = x[bb, cc, y, xx]
                            else:
                                v = 0
                            out[bb, oi, oj, (cc * k + ki) * k + kj] = v
    return out_arr


def col2im(floating[:, :, :, ::1] cols, Py_ssize_t h, Py_ssize_t w,
           int k, int stride, int pad):
    cdef Py_ssize_t b = cols.shape[0], oh = cols.shape[1], ow = cols.shape[2]
    cdef Py_ssize_t c = cols.shape[3] // (k * k)
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out_arr = np.zeros((b, c, h, w), dtype=dtype)
    cdef floating[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t bb, cc, ki, kj, oi, oj, y, xx
    # kernel offsets ascending per element: matches the fallback's slice order
    for bb in range(b):
        for cc in range(c):
            for ki in range(k):
                for kj in range(k):
                    for oi in range(oh):
                        y = oi * stride + ki - pad
                        if y < 0 or y >= h:
                            continue
                        for oj in range(ow):
                            xx = oj * stride + kj - pad
                            if 0 <= xx < w:
                                out[bb, cc, y, xx] += cols[bb, oi, oj,
                                                           (cc * k + ki) * k + kj]
    return out_arr


def nms_suppress(double[:, ::1] boxes, double iou_threshold):
    cdef Py_ssize_t n = boxes.shape[0]
    keep_arr = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] keep = keep_arr
    if n == 0:
        return keep_arr
    areas_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] areas = areas_arr
    cdef Py_ssize_t i, j
    cdef double iw, ih, inter, iou
    for i in range(n):
        areas[i] = (boxes[i, 2] - boxes[i, 0]) * (boxes[i, 3] - boxes[i, 1])
    for i in range(n):
        if not keep[i]:
            continue
        for j in range(i + 1, n):
            if not keep[j]:
                continue
            iw = min(boxes[i, 2], boxes[j, 2]) - max(boxes[i, 0], boxes[j, 0])
            ih = min(boxes[i, 3], boxes[j, 3]) - max(boxes[i, 1], boxes[j, 1])
            inter = max(iw, 0.0) * max(ih, 0.0)
            iou = inter / (areas[i] + areas[j] - inter)
            if iou > iou_threshold:
                keep[j] = 0
    return keep_arr
