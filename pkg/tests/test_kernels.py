"""Backend equivalence: the compiled kernels and the numpy fallback must be
interchangeable down to the bit, and both must match naive references."""

import numpy as np
import pytest

from simrod import _kernels
from simrod._kernels import _numpy as fallback


def naive_im2col(x, k, stride, pad):
    b, c, h, w = x.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((b, oh, ow, c * k * k), dtype=x.dtype)
    for bb in range(b):
        for oi in range(oh):
            for oj in range(ow):
                patch = xp[bb, :, oi * stride:oi * stride + k,
                           oj * stride:oj * stride + k]
                out[bb, oi, oj] = patch.reshape(-1)
    return out


CASES = [(3, 1, 1), (3, 2, 1), (3, 2, 0), (1, 1, 0), (5, 2, 2)]


@pytest.mark.parametrize("k,stride,pad", CASES)
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_im2col_matches_naive(k, stride, pad, dtype):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 3, 11, 11)).astype(dtype)
    got = _kernels.im2col(x, k, stride, pad)
    assert got.dtype == dtype
    np.testing.assert_array_equal(got, naive_im2col(x, k, stride, pad))


@pytest.mark.parametrize("k,stride,pad", CASES)
def test_backends_bitwise_identical(k, stride, pad):
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 4, 10, 10)).astype(np.float32)
    a = _kernels._impl.im2col(np.ascontiguousarray(x), k, stride, pad)
    b = fallback.im2col(x, k, stride, pad)
    assert (a == b).all()
    cols = rng.normal(size=a.shape).astype(np.float32)
    da = _kernels._impl.col2im(np.ascontiguousarray(cols), 10, 10, k, stride, pad)
    db = fallback.col2im(cols, 10, 10, k, stride, pad)
    assert (da == db).all()


@pytest.mark.parametrize("k,stride,pad", CASES)
def test_col2im_adjoint_of_im2col(k, stride, pad):
    # <im2col(x), c> == <x, col2im(c)> since scatter is the gather's adjoint
    rng = np.random.default_rng(2)
    x = rng.normal(size=(2, 3, 9, 9))
    cols = _kernels.im2col(x, k, stride, pad)
    c = rng.normal(size=cols.shape)
    lhs = float((cols * c).sum())
    rhs = float((x * _kernels.col2im(c, 9, 9, k, stride, pad)).sum())
    assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))


def brute_force_nms(boxes, scores, iou_threshold):
    """Independent O(n^2) reference: iterate by score, drop overlaps."""
    from simrod.boxes import iou_corners

    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    keep, dead = [], set()
    for i in order:
        if i in dead:
            continue
        keep.append(i)
        for j in order:
            if j != i and j not in dead and \
                    iou_corners(boxes[i], boxes[j]) > iou_threshold:
                dead.add(j)
    return keep


def random_boxes(rng, n):
    xy = rng.uniform(0, 1, size=(n, 2))
    wh = rng.uniform(0.02, 0.5, size=(n, 2))
    return np.concatenate([xy, xy + wh], axis=1)


def test_nms_matches_brute_force_1000_boxes():
    rng = np.random.default_rng(3)
    boxes = random_boxes(rng, 1000)
    scores = rng.uniform(size=1000)
    got = list(_kernels.nms_keep(boxes, scores, 0.5))
    assert got == brute_force_nms(boxes, scores, 0.5)


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("threshold", [0.3, 0.65, 0.9])
def test_nms_matches_brute_force_randomized(seed, threshold):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(0, 60))
    boxes = random_boxes(rng, n)
    scores = rng.uniform(size=n)
    got = list(_kernels.nms_keep(boxes, scores, threshold))
    assert got == brute_force_nms(boxes, scores, threshold)


def test_nms_keeps_score_ties_stable():
    boxes = np.array([[0, 0, 1, 1], [2, 2, 3, 3], [4, 4, 5, 5]], dtype=float)
    scores = np.array([0.5, 0.5, 0.5])
    assert list(_kernels.nms_keep(boxes, scores, 0.5)) == [0, 1, 2]
