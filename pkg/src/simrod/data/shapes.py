"""Synthetic shapes dataset: colored geometric objects on textured backgrounds.

Small enough to train the tiny detector in seconds, rich enough that
photometric corruption actually hurts. Generation is a pure function of the
config: the same seed always produces byte-identical datasets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw

from ..boxes import BoundingBox, iou_corners
from ..errors import ConfigError
from .datasets import SOURCE, Dataset, LabeledImage, u8_to_pixels

SHAPE_KINDS = ("circle", "square", "triangle", "diamond", "cross")

# base RGB per class, jittered per object
_BASE_COLORS = (
    (205, 60, 60),
    (60, 175, 70),
    (65, 90, 200),
    (215, 185, 50),
    (180, 70, 185),
)


@dataclass(frozen=True)
class ShapesConfig:
    n_images: int
    image_size: int = 96
    n_classes: int = 3
    objects_min: int = 1
    objects_max: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_images < 1:
            raise ConfigError(f"n_images must be positive, got {self.n_images}")
        if self.image_size < 8:
            raise ConfigError(f"image_size must be >= 8, got {self.image_size}")
        if not 2 <= self.n_classes <= len(SHAPE_KINDS):
            raise ConfigError(f"n_classes must be in 2..{len(SHAPE_KINDS)}, got {self.n_classes}")
        if self.objects_min < 0 or self.objects_max < self.objects_min:
            raise ConfigError(
                f"bad objects range [{self.objects_min}, {self.objects_max}]")


def _shape_polygon(kind: str, cx: float, cy: float, half: float):
    if kind == "square":
        return [(cx - half, cy - half), (cx + half, cy - half),
                (cx + half, cy + half), (cx - half, cy + half)]
    if kind == "triangle":
        return [(cx, cy - half), (cx + half, cy + half), (cx - half, cy + half)]
    if kind == "diamond":
        return [(cx, cy - half), (cx + half, cy), (cx, cy + half), (cx - half, cy)]
    if kind == "cross":
        t = half * 0.38
        return [(cx - t, cy - half), (cx + t, cy - half), (cx + t, cy - t),
                (cx + half, cy - t), (cx + half, cy + t), (cx + t, cy + t),
                (cx + t, cy + half), (cx - t, cy + half), (cx - t, cy + t),
                (cx - half, cy + t), (cx - half, cy - t), (cx - t, cy - t)]
    raise ConfigError(f"unknown shape kind {kind!r}")


def _draw_shape(draw: ImageDraw.ImageDraw, kind: str, cx, cy, half, color):
    if kind == "circle":
        draw.ellipse([cx - half, cy - half, cx + half, cy + half], fill=color)
    else:
        draw.polygon(_shape_polygon(kind, cx, cy, half), fill=color)


def _tight_box(kind: str, cx, cy, half, size: int, class_id: int) -> BoundingBox:
    """Exact pixel-tight box: render the shape alone and take its mask extent."""
    mask = Image.new("L", (size, size), 0)
    _draw_shape(ImageDraw.Draw(mask), kind, cx, cy, half, 255)
    arr = np.asarray(mask)
    ys, xs = np.nonzero(arr)
    x1, x2 = xs.min(), xs.max() + 1
    y1, y2 = ys.min(), ys.max() + 1
    return BoundingBox(class_id,
                       cx=(x1 + x2) / 2 / size, cy=(y1 + y2) / 2 / size,
                       w=(x2 - x1) / size, h=(y2 - y1) / size)


def _generate_image(cfg: ShapesConfig, idx: int, rng: np.random.Generator) -> LabeledImage:
    size = cfg.image_size
    bg = rng.integers(110, 190, size=3)
    noise = rng.integers(-10, 11, size=(size, size, 3))
    canvas_u8 = np.clip(bg[None, None, :] + noise, 0, 255).astype(np.uint8)
    img = Image.fromarray(canvas_u8)
    draw = ImageDraw.Draw(img)

    n_objects = int(rng.integers(cfg.objects_min, cfg.objects_max + 1))
    boxes: list[BoundingBox] = []
    for _ in range(n_objects):
        class_id = int(rng.integers(cfg.n_classes))
        kind = SHAPE_KINDS[class_id]
        # rejection-sample against heavy overlap, draw regardless after 10 tries
        for _attempt in range(10):
            half = float(rng.uniform(0.09, 0.20)) * size
            cx = float(rng.uniform(half + 1, size - half - 1))
            cy = float(rng.uniform(half + 1, size - half - 1))
            cand = (cx - half, cy - half, cx + half, cy + half)
            if all(iou_corners(cand, (b.cx * size - b.w * size / 2,
                                      b.cy * size - b.h * size / 2,
                                      b.cx * size + b.w * size / 2,
                                      b.cy * size + b.h * size / 2)) < 0.25
                   for b in boxes):
                break
        jitter = rng.integers(-28, 29, size=3)
        color = tuple(int(np.clip(c + j, 0, 255))
                      for c, j in zip(_BASE_COLORS[class_id], jitter))
        _draw_shape(draw, kind, cx, cy, half, color)
        boxes.append(_tight_box(kind, cx, cy, half, size, class_id))

    pixels = u8_to_pixels(np.asarray(img))
    return LabeledImage(pixels, boxes, SOURCE, f"img_{idx:05d}")


def generate_shapes_dataset(cfg: ShapesConfig) -> Dataset:
    """Generate ``cfg.n_images`` labeled source-domain images."""
    items = []
    for idx in range(cfg.n_images):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((cfg.rng_seed, idx))))
        items.append(_generate_image(cfg, idx, rng))
    return Dataset(items, SOURCE, list(SHAPE_KINDS[:cfg.n_classes]))
