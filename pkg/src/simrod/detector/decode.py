"""Raw grid outputs -> thresholded, NMS-filtered detections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.special import expit

from .. import _kernels
from ..boxes import BoundingBox
from ..errors import ContractViolation

EVAL_CONF_THRESHOLD = 0.001
NMS_IOU_THRESHOLD = 0.65
PSEUDO_CONF_THRESHOLD = 0.4


@dataclass(frozen=True)
class Detection:
    """A predicted box tied to its image."""

    box: BoundingBox
    image_id: str

    def __post_init__(self):
        if self.box.confidence is None:
            raise ContractViolation("detections must carry a confidence")


def to_input(pixels: np.ndarray, input_size: int) -> np.ndarray:
    """HWC [0,1] float image -> (3, S, S) float32, resizing if needed."""
    h, w = pixels.shape[:2]
    if (h, w) != (input_size, input_size):
        img = Image.fromarray(
            np.clip(np.round(pixels * 255.0), 0, 255).astype(np.uint8))
        img = img.resize((input_size, input_size), Image.BILINEAR)
        pixels = np.asarray(img).astype(np.float32) / 255.0
    return np.ascontiguousarray(pixels.transpose(2, 0, 1).astype(np.float32))


def decode_raw(raw: np.ndarray, conf_threshold: float, nms_iou: float,
               n_classes: int) -> list[BoundingBox]:
    """Decode one image's (G, G, 5+C) grid. Detections come back sorted by
    confidence descending; per-class NMS; every confidence >= the threshold."""
    grid = raw.shape[0]
    z = raw.reshape(-1, raw.shape[-1]).astype(np.float64)
    obj_p = expit(z[:, 4])
    cls_p = expit(z[:, 5:])
    cls_id = np.argmax(cls_p, axis=1)
    conf = obj_p * cls_p[np.arange(z.shape[0]), cls_id]

    s = expit(z[:, 0:4])
    jj = np.arange(z.shape[0]) % grid
    ii = np.arange(z.shape[0]) // grid
    bcx = (jj + s[:, 0]) / grid
    bcy = (ii + s[:, 1]) / grid
    bw, bh = s[:, 2], s[:, 3]

    keep = conf >= conf_threshold
    if not np.any(keep):
        return []
    idx = np.nonzero(keep)[0]
    corners = np.stack([bcx[idx] - bw[idx] / 2, bcy[idx] - bh[idx] / 2,
                        bcx[idx] + bw[idx] / 2, bcy[idx] + bh[idx] / 2], axis=1)
    out = []
    for c in np.unique(cls_id[idx]):
        sel = np.nonzero(cls_id[idx] == c)[0]
        kept = _kernels.nms_keep(corners[sel], conf[idx][sel], nms_iou)
        for k in kept:
            g = idx[sel[k]]
            out.append(BoundingBox(int(c), float(bcx[g]), float(bcy[g]),
                                   float(bw[g]), float(bh[g]),
                                   confidence=float(conf[g])))
    order = np.argsort([-b.confidence for b in out], kind="stable")
    return [out[k] for k in order]


def decode(detector, image, conf_threshold: float = EVAL_CONF_THRESHOLD,
           nms_iou: float = NMS_IOU_THRESHOLD) -> list[Detection]:
    """Run one image (LabeledImage or HWC array) through the model in eval
    mode and decode."""
    if not (0.0 <= conf_threshold <= 1.0 and 0.0 <= nms_iou <= 1.0):
        raise ContractViolation("thresholds must lie in [0, 1]")
    pixels = image.pixels if hasattr(image, "pixels") else image
    image_id = getattr(image, "id", "")
    x = to_input(pixels, detector.config.input_size)[None]
    raw = detector.forward(x, training=False)
    boxes = decode_raw(raw[0], conf_threshold, nms_iou, detector.config.n_classes)
    return [Detection(b, image_id) for b in boxes]


def predict_dataset(detector, dataset, conf_threshold: float = EVAL_CONF_THRESHOLD,
                    nms_iou: float = NMS_IOU_THRESHOLD,
                    batch_size: int = 32) -> list[Detection]:
    """Batched eval-mode inference over a whole dataset."""
    cfg = detector.config
    detections: list[Detection] = []
    items = dataset.items
    for start in range(0, len(items), batch_size):
        chunk = items[start:start + batch_size]
        x = np.stack([to_input(it.pixels, cfg.input_size) for it in chunk])
        raw = detector.forward(x, training=False)
        for k, item in enumerate(chunk):
            for b in decode_raw(raw[k], conf_threshold, nms_iou, cfg.n_classes):
                detections.append(Detection(b, item.id))
    return detections
