"""Domain-mixed 2x2 collage augmentation with exact box remapping.

Each training image becomes the first member of a four-image collage; the
other three members are drawn by a balanced sampler that picks the source or
target domain with equal probability and then an image uniformly within it
(with replacement). Source members contribute ground truth, target members
contribute pseudo-labels, and all box coordinates are recomputed into the
collage frame. Everything is a pure function of (inputs, rng), so a fixed
seed reproduces collages bitwise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw

from .boxes import BoundingBox
from .data.datasets import SOURCE, TARGET, Dataset, LabeledImage, u8_to_pixels
from .errors import ContractViolation

logger = logging.getLogger(__name__)

MIN_VISIBLE_DEFAULT = 0.25

Rect = tuple[float, float, float, float]


@dataclass(frozen=True)
class MixPlan:
    """Who goes where in one collage: members in TL,TR,BL,BR order, the split
    point, and per-member crop (original-image pixels) and placement (canvas
    pixels) rectangles."""

    members: tuple[tuple[str, str], ...]
    center: tuple[int, int]
    crops: tuple[Rect, ...]
    placements: tuple[Rect, ...]


@dataclass
class MixedSample:
    pixels: np.ndarray  # (S, S, 3) float32
    boxes: list[BoundingBox]
    provenance: MixPlan


def balanced_sample(source: Dataset, target: Dataset, k: int, rng) -> list[tuple[str, str]]:
    """k draws of (image_id, domain): fair coin over domains, then uniform
    with replacement inside the chosen one. An empty domain falls back to the
    other with a warning."""
    if len(source) == 0 and len(target) == 0:
        raise ContractViolation("both domains empty")
    if k < 1:
        raise ContractViolation(f"k must be >= 1, got {k}")
    warned = False
    out = []
    for _ in range(k):
        pick_source = rng.random() < 0.5
        if pick_source and len(source) == 0:
            pick_source = False
            warned = True
        elif not pick_source and len(target) == 0:
            pick_source = True
            warned = True
        ds, domain = (source, SOURCE) if pick_source else (target, TARGET)
        idx = int(rng.integers(len(ds)))
        out.append((ds.items[idx].id, domain))
    if warned:
        logger.warning("balanced_sample: one domain is empty, drew from the other")
    return out


def remap_boxes(boxes, image_size: tuple[int, int], crop_rect: Rect,
                placement_rect: Rect, canvas_size: int,
                min_visible: float = MIN_VISIBLE_DEFAULT) -> list[BoundingBox]:
    """Map boxes (normalized to ``image_size``) through the affine transform
    taking crop_rect to placement_rect, clip to the placement, renormalize to
    the canvas, and drop boxes whose visible area fell below ``min_visible``
    of their mapped area."""
    if not 0.0 < min_visible <= 1.0:
        raise ContractViolation(f"min_visible must be in (0, 1], got {min_visible}")
    cx1, cy1, cx2, cy2 = crop_rect
    px1, py1, px2, py2 = placement_rect
    if cx2 <= cx1 or cy2 <= cy1 or px2 <= px1 or py2 <= py1:
        raise ContractViolation(
            f"degenerate rects crop={crop_rect} placement={placement_rect}")
    w_img, h_img = image_size
    sx = (px2 - px1) / (cx2 - cx1)
    sy = (py2 - py1) / (cy2 - cy1)
    out = []
    for box in boxes:
        bx1, by1, bx2, by2 = box.corners
        mx1 = px1 + (bx1 * w_img - cx1) * sx
        mx2 = px1 + (bx2 * w_img - cx1) * sx
        my1 = py1 + (by1 * h_img - cy1) * sy
        my2 = py1 + (by2 * h_img - cy1) * sy
        mapped_area = (mx2 - mx1) * (my2 - my1)
        vx1, vy1 = max(mx1, px1), max(my1, py1)
        vx2, vy2 = min(mx2, px2), min(my2, py2)
        if vx2 - vx1 <= 0 or vy2 - vy1 <= 0:
            continue
        if (vx2 - vx1) * (vy2 - vy1) < min_visible * mapped_area:
            continue
        out.append(BoundingBox(
            box.class_id,
            cx=(vx1 + vx2) / 2 / canvas_size, cy=(vy1 + vy2) / 2 / canvas_size,
            w=(vx2 - vx1) / canvas_size, h=(vy2 - vy1) / canvas_size,
            confidence=box.confidence))
    return out


def _quadrants(center: tuple[int, int], size: int) -> tuple[Rect, Rect, Rect, Rect]:
    cx, cy = center
    return ((0, 0, cx, cy), (cx, 0, size, cy),
            (0, cy, cx, size), (cx, cy, size, size))


def _crop_for_quadrant(img: LabeledImage, quad: Rect, rng):
    """Scale the member uniformly to cover its quadrant, then randomly crop
    the one overflowing dimension. No padding, and the whole image stays
    statistically represented (a free window would oversample image centers,
    which skews the BN statistics the adaptation relies on).

    Returns (crop_rect in original-image coords, cropped uint8 pixels).
    """
    qw, qh = int(quad[2] - quad[0]), int(quad[3] - quad[1])
    w_img, h_img = img.size
    scale = max(qw / w_img, qh / h_img)
    sw = max(qw, int(round(w_img * scale)))
    sh = max(qh, int(round(h_img * scale)))
    ox = int(rng.integers(0, sw - qw + 1))
    oy = int(rng.integers(0, sh - qh + 1))
    u8 = np.clip(np.round(img.pixels * 255.0), 0, 255).astype(np.uint8)
    resized = Image.fromarray(u8).resize((sw, sh), Image.BILINEAR)
    patch = np.asarray(resized)[oy:oy + qh, ox:ox + qw]
    sx, sy = sw / w_img, sh / h_img
    crop_rect = (ox / sx, oy / sy, (ox + qw) / sx, (oy + qh) / sy)
    return crop_rect, patch


def _member_labels(member_id: str, domain: str, first: LabeledImage,
                   source: Dataset, pseudo_labels) -> list[BoundingBox]:
    if domain == TARGET:
        if member_id not in pseudo_labels:
            raise ContractViolation(
                f"no pseudo-label entry for target image {member_id!r}")
        return pseudo_labels[member_id]
    if member_id == first.id:
        return first.boxes
    return source.by_id(member_id).boxes


def domain_mix(image: LabeledImage, source: Dataset, target: Dataset,
               pseudo, canvas: int, rng,
               min_visible: float = MIN_VISIBLE_DEFAULT) -> MixedSample:
    """Build one collage whose first member is ``image``."""
    pseudo_labels = pseudo.labels if hasattr(pseudo, "labels") else pseudo
    members = [(image.id, image.domain)] + balanced_sample(source, target, 3, rng)
    center = (int(rng.integers(canvas // 4, 3 * canvas // 4 + 1)),
              int(rng.integers(canvas // 4, 3 * canvas // 4 + 1)))
    placements = _quadrants(center, canvas)
    out_px = np.empty((canvas, canvas, 3), dtype=np.uint8)
    crops = []
    boxes: list[BoundingBox] = []
    for (member_id, domain), quad in zip(members, placements):
        if domain == TARGET:
            member_img = target.by_id(member_id)
        elif member_id == image.id:
            member_img = image
        else:
            member_img = source.by_id(member_id)
        crop_rect, patch = _crop_for_quadrant(member_img, quad, rng)
        x1, y1, x2, y2 = (int(v) for v in quad)
        out_px[y1:y2, x1:x2] = patch
        crops.append(crop_rect)
        labels = _member_labels(member_id, domain, image, source, pseudo_labels)
        boxes.extend(remap_boxes(labels, member_img.size, crop_rect, quad,
                                 canvas, min_visible))
    plan = MixPlan(tuple(members), center, tuple(crops), tuple(placements))
    return MixedSample(u8_to_pixels(out_px), boxes, plan)


def domain_mix_batch(batch: list[LabeledImage], source: Dataset, target: Dataset,
                     pseudo, canvas: int, rng,
                     min_visible: float = MIN_VISIBLE_DEFAULT) -> list[MixedSample]:
    """Algorithmic core of the augmentation: one collage per batch image."""
    return [domain_mix(img, source, target, pseudo, canvas, rng, min_visible)
            for img in batch]


def save_mix_debug(samples, directory) -> None:
    """Dump collages with their boxes drawn, for eyeballing."""
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, sample in enumerate(samples):
        u8 = np.clip(np.round(sample.pixels * 255.0), 0, 255).astype(np.uint8)
        img = Image.fromarray(u8)
        draw = ImageDraw.Draw(img)
        size = img.size[0]
        for b in sample.boxes:
            x1, y1, x2, y2 = (v * size for v in b.corners)
            draw.rectangle([x1, y1, x2, y2], outline=(255, 255, 255), width=1)
        img.save(directory / f"mix_{i:04d}.png")
