"""GIoU and focal losses, target assignment, and the combined detection loss.

Everything here is analytic: each piece returns its gradient alongside the
value, and the whole detection loss is verified against central finite
differences in the tests.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import ContractViolation

_EPS = 1e-12


# ---------------------------------------------------------------------------
# GIoU

def _giou_core(p: np.ndarray, t: np.ndarray):
    """Vectorized GIoU over corner boxes (N,4). Returns value plus the
    intermediates the backward pass needs."""
    iw = np.minimum(p[:, 2], t[:, 2]) - np.maximum(p[:, 0], t[:, 0])
    ih = np.minimum(p[:, 3], t[:, 3]) - np.maximum(p[:, 1], t[:, 1])
    inter = np.maximum(iw, 0.0) * np.maximum(ih, 0.0)
    area_p = (p[:, 2] - p[:, 0]) * (p[:, 3] - p[:, 1])
    area_t = (t[:, 2] - t[:, 0]) * (t[:, 3] - t[:, 1])
    union = area_p + area_t - inter
    iou = inter / union
    cw = np.maximum(p[:, 2], t[:, 2]) - np.minimum(p[:, 0], t[:, 0])
    ch = np.maximum(p[:, 3], t[:, 3]) - np.minimum(p[:, 1], t[:, 1])
    area_c = cw * ch
    g = iou - (area_c - union) / area_c
    return g, (p, t, iw, ih, inter, union, iou, cw, ch, area_c)


def giou_forward(pred: np.ndarray, target: np.ndarray):
    g, cache = _giou_core(np.asarray(pred, dtype=np.float64),
                          np.asarray(target, dtype=np.float64))
    return g, cache


def giou_backward(cache, dg: np.ndarray) -> np.ndarray:
    """Gradient of GIoU wrt the predicted corners; dg is the upstream grad."""
    p, t, iw, ih, inter, union, iou, cw, ch, area_c = cache
    pos = (iw > 0) & (ih > 0)
    ihp = np.where(pos, ih, 0.0)
    iwp = np.where(pos, iw, 0.0)

    # d inter / d pred corners
    di = np.zeros_like(p)
    di[:, 0] = -ihp * (p[:, 0] > t[:, 0])
    di[:, 2] = ihp * (p[:, 2] < t[:, 2])
    di[:, 1] = -iwp * (p[:, 1] > t[:, 1])
    di[:, 3] = iwp * (p[:, 3] < t[:, 3])

    wp = p[:, 2] - p[:, 0]
    hp = p[:, 3] - p[:, 1]
    dap = np.stack([-hp, -wp, hp, wp], axis=1)
    du = dap - di
    diou = (di * union[:, None] - inter[:, None] * du) / (union ** 2)[:, None]

    dcw = np.zeros_like(p)
    dcw[:, 0] = -(p[:, 0] < t[:, 0]).astype(p.dtype)
    dcw[:, 2] = (p[:, 2] > t[:, 2]).astype(p.dtype)
    dch = np.zeros_like(p)
    dch[:, 1] = -(p[:, 1] < t[:, 1]).astype(p.dtype)
    dch[:, 3] = (p[:, 3] > t[:, 3]).astype(p.dtype)
    dac = dcw * ch[:, None] + dch * cw[:, None]

    # g = iou - 1 + union / area_c
    dratio = (du * area_c[:, None] - union[:, None] * dac) / (area_c ** 2)[:, None]
    return (diou + dratio) * dg[:, None]


def giou(a, b) -> float:
    """GIoU of two boxes given as corner 4-tuples or BoundingBox objects."""
    ca = np.asarray(a.corners if hasattr(a, "corners") else a, dtype=np.float64)
    cb = np.asarray(b.corners if hasattr(b, "corners") else b, dtype=np.float64)
    for c in (ca, cb):
        if (c[2] - c[0]) <= 0 or (c[3] - c[1]) <= 0:
            raise ValueError(f"zero-area box {tuple(c)}")
    g, _ = _giou_core(ca[None, :], cb[None, :])
    return float(g[0])


# ---------------------------------------------------------------------------
# Focal loss

def focal_elementwise(logits, targets, gamma: float, alpha: float):
    """Per-element focal loss and its gradient wrt the logits."""
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    p = expit(z)
    log_p = -np.logaddexp(0.0, -z)
    log_1mp = -np.logaddexp(0.0, z)
    pos = t == 1.0
    pt = np.where(pos, p, 1.0 - p)
    log_pt = np.where(pos, log_p, log_1mp)
    omp = np.where(pos, 1.0 - p, p)  # = 1 - pt
    at = np.where(pos, alpha, 1.0 - alpha)

    loss = -at * omp ** gamma * log_pt

    pt_safe = np.maximum(pt, _EPS)
    if gamma == 0.0:
        dl_dpt = -at / pt_safe
    else:
        omp_safe = np.maximum(omp, _EPS)
        dl_dpt = at * (gamma * omp_safe ** (gamma - 1.0) * log_pt
                       - omp ** gamma / pt_safe)
    dpt_dz = np.where(pos, 1.0, -1.0) * p * (1.0 - p)
    return loss, dl_dpt * dpt_dz


def focal_loss(logits, targets, gamma: float = 1.5, alpha: float = 0.25) -> float:
    """Mean focal loss; targets must be 0/1 and broadcast to the logits."""
    t = np.asarray(targets)
    if not np.all((t == 0) | (t == 1)):
        raise ContractViolation("focal targets must be 0 or 1")
    loss, _ = focal_elementwise(logits, np.broadcast_to(t, np.shape(logits)),
                                gamma, alpha)
    return float(loss.mean())


# ---------------------------------------------------------------------------
# Assignment and the combined loss

def assign_cell(coord: float, grid: int) -> int:
    """Responsible cell index for a center coordinate; boundary ties go to
    the lower cell."""
    idx = int(np.ceil(coord * grid)) - 1
    return min(max(idx, 0), grid - 1)


def build_targets(labels, grid: int, n_classes: int):
    """labels: per-image lists of BoundingBox. Returns (obj, boxes, cls) grids;
    cls is -1 where no object. First box in list order wins a contested cell."""
    bsz = len(labels)
    obj = np.zeros((bsz, grid, grid), dtype=np.float64)
    boxes = np.zeros((bsz, grid, grid, 4), dtype=np.float64)
    cls = np.full((bsz, grid, grid), -1, dtype=np.int64)
    for b, image_boxes in enumerate(labels):
        for box in image_boxes:
            if box.class_id >= n_classes:
                raise ContractViolation(
                    f"label class {box.class_id} >= n_classes {n_classes}")
            i = assign_cell(box.cy, grid)
            j = assign_cell(box.cx, grid)
            if obj[b, i, j] == 1.0:
                continue
            obj[b, i, j] = 1.0
            boxes[b, i, j] = (box.cx, box.cy, box.w, box.h)
            cls[b, i, j] = box.class_id
    return obj, boxes, cls


def detection_loss(raw: np.ndarray, labels, cfg):
    """Total loss, per-term breakdown, and the gradient wrt ``raw``.

    raw: (B, G, G, 5+C). Breakdown keys: box (GIoU), obj (focal), cls (focal).
    All three reduce by mean, so duplicating a batch leaves the loss equal.
    """
    bsz, grid, _, _ = raw.shape
    n_classes = cfg.n_classes
    obj_t, box_t, cls_t = build_targets(labels, grid, n_classes)
    z = raw.astype(np.float64)
    draw = np.zeros_like(z)

    # objectness: focal over every cell
    obj_loss_elem, obj_grad = focal_elementwise(
        z[..., 4], obj_t, cfg.focal_gamma, cfg.focal_alpha)
    n_cells = obj_loss_elem.size
    obj_loss = obj_loss_elem.mean()
    draw[..., 4] = cfg.obj_weight * obj_grad / n_cells

    pos = obj_t == 1.0
    n_pos = int(pos.sum())
    if n_pos == 0:
        box_loss = 0.0
        cls_loss = 0.0
    else:
        # classification: focal on positive cells, one-vs-all
        cls_z = z[..., 5:][pos]                       # (P, C)
        cls_target = np.zeros((n_pos, n_classes), dtype=np.float64)
        cls_target[np.arange(n_pos), cls_t[pos]] = 1.0
        cls_loss_elem, cls_grad = focal_elementwise(
            cls_z, cls_target, cfg.focal_gamma, cfg.focal_alpha)
        cls_loss = cls_loss_elem.mean()
        dcls = np.zeros_like(z[..., 5:])
        dcls[pos] = cfg.cls_weight * cls_grad / cls_loss_elem.size
        draw[..., 5:] = dcls

        # box: 1 - GIoU between decoded prediction and target, positives only
        cell_i, = np.nonzero(pos.reshape(-1))
        jj = (cell_i % grid).astype(np.float64)
        ii = ((cell_i // grid) % grid).astype(np.float64)
        box_z = z[..., 0:4][pos]                      # (P, 4) logits
        s = expit(box_z)
        bcx = (jj + s[:, 0]) / grid
        bcy = (ii + s[:, 1]) / grid
        bw, bh = s[:, 2], s[:, 3]
        pred_c = np.stack([bcx - bw / 2, bcy - bh / 2,
                           bcx + bw / 2, bcy + bh / 2], axis=1)
        tgt = box_t[pos]
        tgt_c = np.stack([tgt[:, 0] - tgt[:, 2] / 2, tgt[:, 1] - tgt[:, 3] / 2,
                          tgt[:, 0] + tgt[:, 2] / 2, tgt[:, 1] + tgt[:, 3] / 2],
                         axis=1)
        g, cache = giou_forward(pred_c, tgt_c)
        box_loss = (1.0 - g).mean()
        dcorners = giou_backward(cache, np.full(n_pos, -1.0 / n_pos))
        # corners -> (bcx, bcy, bw, bh) -> sigmoids -> logits
        dbcx = dcorners[:, 0] + dcorners[:, 2]
        dbcy = dcorners[:, 1] + dcorners[:, 3]
        dbw = (dcorners[:, 2] - dcorners[:, 0]) / 2
        dbh = (dcorners[:, 3] - dcorners[:, 1]) / 2
        ds = np.stack([dbcx / grid, dbcy / grid, dbw, dbh], axis=1)
        dbox_z = cfg.box_weight * ds * s * (1.0 - s)
        dbox = np.zeros_like(z[..., 0:4])
        dbox[pos] = dbox_z
        draw[..., 0:4] = dbox

    breakdown = {"box": float(box_loss), "obj": float(obj_loss),
                 "cls": float(cls_loss)}
    total = (cfg.box_weight * box_loss + cfg.obj_weight * obj_loss
             + cfg.cls_weight * cls_loss)
    return float(total), breakdown, draw.astype(raw.dtype)


def compute_loss(detector, images: np.ndarray, labels, training: bool = False):
    """Forward + loss without gradients; returns (total, breakdown)."""
    raw = detector.forward(images, training=training)
    total, breakdown, _ = detection_loss(raw, labels, detector.config)
    return total, breakdown
