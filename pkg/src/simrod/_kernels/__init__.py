"""Hot-kernel backend: compiled extension when available, numpy otherwise.

The training loop spends most of its time in conv patch gather/scatter
(im2col / col2im) and in NMS. Both exist as a Cython extension and as a
pure-numpy fallback with identical numerics; the extension is preferred
unless SIMROD_PURE_PYTHON=1 is set. ``BACKEND`` names the active one.
"""

import os

import numpy as np

from . import _numpy

if os.environ.get("SIMROD_PURE_PYTHON") == "1":
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _ext as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _numpy
        BACKEND = "numpy"


def im2col(x, k, stride=1, pad=0):
    return _impl.im2col(np.ascontiguousarray(x), k, stride, pad)


def col2im(cols, h, w, k, stride=1, pad=0):
    return _impl.col2im(np.ascontiguousarray(cols), h, w, k, stride, pad)


def nms_keep(boxes, scores, iou_threshold):
    """Greedy NMS. Returns indices of kept boxes, highest score first.

    boxes: (N,4) corner format; scores: (N,). Ties in score break toward the
    lower original index so results are reproducible.
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    order = np.argsort(-scores, kind="stable")
    mask = _impl.nms_suppress(np.ascontiguousarray(boxes[order]),
                              float(iou_threshold))
    return order[mask.astype(bool)]
