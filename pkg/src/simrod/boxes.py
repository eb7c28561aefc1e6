"""Bounding boxes in normalized center format, plus the geometry helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundingBox:
    """One annotation or prediction: class id, normalized center-format box,
    and an optional confidence (absent for ground truth)."""

    class_id: int
    cx: float
    cy: float
    w: float
    h: float
    confidence: float | None = None

    def __post_init__(self):
        if self.class_id < 0 or int(self.class_id) != self.class_id:
            raise ValueError(f"class_id must be a non-negative integer, got {self.class_id}")
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise ValueError(f"box center ({self.cx}, {self.cy}) outside [0,1]^2")
        if not (self.w > 0.0 and self.h > 0.0):
            raise ValueError(f"box size ({self.w}, {self.h}) must be positive")
        if self.confidence is not None and not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0,1]")

    @property
    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2), still in normalized image coordinates."""
        return (self.cx - self.w / 2, self.cy - self.h / 2,
                self.cx + self.w / 2, self.cy + self.h / 2)

    @property
    def area(self) -> float:
        return self.w * self.h

    def with_confidence(self, confidence: float) -> "BoundingBox":
        return BoundingBox(self.class_id, self.cx, self.cy, self.w, self.h, confidence)

    def without_confidence(self) -> "BoundingBox":
        return BoundingBox(self.class_id, self.cx, self.cy, self.w, self.h)


def boxes_to_corner_array(boxes) -> np.ndarray:
    """Stack boxes into an (N,4) corner array (empty-safe)."""
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([b.corners for b in boxes], dtype=np.float64)


def iou_corners(a, b) -> float:
    """IoU of two corner-format boxes."""
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    if inter == 0.0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def pairwise_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU matrix (len(a), len(b)) for corner arrays."""
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    ix = (np.minimum(a[:, None, 2], b[None, :, 2])
          - np.maximum(a[:, None, 0], b[None, :, 0])).clip(min=0)
    iy = (np.minimum(a[:, None, 3], b[None, :, 3])
          - np.maximum(a[:, None, 1], b[None, :, 1])).clip(min=0)
    inter = ix * iy
    area_a = ((a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1]))[:, None]
    area_b = ((b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1]))[None, :]
    union = area_a + area_b - inter
    return np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
