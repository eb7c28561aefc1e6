"""Dataset model and the on-disk layout.

A dataset directory looks like::

    images/<id>.png     8-bit RGB, lossless
    labels/<id>.txt     one record per box: class_id cx cy w h [confidence]
    meta.txt            class names, one per line

Boxes are stored in normalized center format. A missing label file (or a
missing labels/ directory) loads as an image with no boxes, which is how
unlabeled target data is represented.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from ..boxes import BoundingBox
from ..errors import ConfigError, ParseError

SOURCE = "source"
TARGET = "target"
MIXED = "mixed"
_DOMAINS = (SOURCE, TARGET, MIXED)


def quantize_pixels(pixels: np.ndarray) -> np.ndarray:
    """Snap float pixels to the 8-bit grid so disk round-trips are exact."""
    u8 = np.clip(np.round(pixels.astype(np.float64) * 255.0), 0, 255)
    return (u8 / 255.0).astype(np.float32)


def pixels_to_u8(pixels: np.ndarray) -> np.ndarray:
    return np.clip(np.round(pixels.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)


def u8_to_pixels(u8: np.ndarray) -> np.ndarray:
    return (u8.astype(np.float64) / 255.0).astype(np.float32)


@dataclass(eq=False)
class LabeledImage:
    """An image with its boxes and a domain tag."""

    pixels: np.ndarray  # (H, W, 3) float32 in [0, 1]
    boxes: list[BoundingBox]
    domain: str
    id: str

    def __eq__(self, other):
        if not isinstance(other, LabeledImage):
            return NotImplemented
        return (self.id == other.id and self.domain == other.domain
                and self.boxes == other.boxes
                and np.array_equal(self.pixels, other.pixels))

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ConfigError(f"image {self.id!r}: pixels must be HxWx3, got {self.pixels.shape}")
        if self.pixels.shape[0] < 8 or self.pixels.shape[1] < 8:
            raise ConfigError(f"image {self.id!r}: minimum size is 8x8, got {self.pixels.shape[:2]}")
        if self.domain not in (SOURCE, TARGET):
            raise ConfigError(f"image {self.id!r}: bad domain {self.domain!r}")

    @property
    def size(self) -> tuple[int, int]:
        """(width, height) in pixels."""
        return self.pixels.shape[1], self.pixels.shape[0]

    def without_boxes(self) -> "LabeledImage":
        return replace(self, boxes=[])


@dataclass
class Dataset:
    """An ordered collection of labeled images sharing one class list."""

    items: list[LabeledImage]
    domain: str
    class_names: list[str]
    _by_id: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.domain not in _DOMAINS:
            raise ConfigError(f"bad dataset domain {self.domain!r}")
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ConfigError(f"duplicate image ids: {dupes[:5]}")
        n = len(self.class_names)
        for it in self.items:
            for b in it.boxes:
                if b.class_id >= n:
                    raise ConfigError(
                        f"image {it.id!r}: class_id {b.class_id} >= {n} classes")
        self._by_id = {it.id: it for it in self.items}

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def by_id(self, image_id: str) -> LabeledImage:
        return self._by_id[image_id]

    @property
    def ids(self) -> list[str]:
        return [it.id for it in self.items]

    def without_labels(self) -> "Dataset":
        """A view with every box list emptied (unlabeled use)."""
        return Dataset([it.without_boxes() for it in self.items],
                       self.domain, list(self.class_names))


def format_label_record(box: BoundingBox) -> str:
    # repr round-trips doubles exactly, keeping save/load lossless
    parts = [str(box.class_id)] + [repr(float(v))
                                   for v in (box.cx, box.cy, box.w, box.h)]
    if box.confidence is not None:
        parts.append(repr(float(box.confidence)))
    return " ".join(parts)


def parse_label_record(line: str, where: str, require_confidence: bool = False) -> BoundingBox:
    """Parse one whitespace-separated record; ``where`` is "file:line" for errors."""
    fields = line.split()
    if len(fields) not in (5, 6):
        raise ParseError(f"{where}: expected 5 or 6 fields, got {len(fields)}")
    if require_confidence and len(fields) != 6:
        raise ParseError(f"{where}: confidence column is mandatory here")
    try:
        class_id = int(fields[0])
        values = [float(v) for v in fields[1:]]
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None
    conf = values[4] if len(values) == 5 else None
    try:
        return BoundingBox(class_id, values[0], values[1], values[2], values[3], conf)
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None


def parse_label_file(path: Path, require_confidence: bool = False) -> list[BoundingBox]:
    boxes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            boxes.append(parse_label_record(line, f"{path}:{lineno}", require_confidence))
    return boxes


def save_dataset(ds: Dataset, directory) -> None:
    directory = Path(directory)
    (directory / "images").mkdir(parents=True, exist_ok=True)
    (directory / "labels").mkdir(parents=True, exist_ok=True)
    with open(directory / "meta.txt", "w") as fh:
        for name in ds.class_names:
            fh.write(name + "\n")
    for item in ds.items:
        Image.fromarray(pixels_to_u8(item.pixels)).save(directory / "images" / f"{item.id}.png")
        with open(directory / "labels" / f"{item.id}.txt", "w") as fh:
            for box in item.boxes:
                fh.write(format_label_record(box) + "\n")


def load_dataset(directory, domain: str = SOURCE) -> Dataset:
    """Load a dataset directory. The layout stores no domain, so the caller
    says which one this is (images default to the dataset's domain)."""
    directory = Path(directory)
    meta = directory / "meta.txt"
    if not meta.is_file():
        raise ParseError(f"{meta}: missing")
    class_names = [ln.strip() for ln in meta.read_text().splitlines() if ln.strip()]
    item_domain = domain if domain in (SOURCE, TARGET) else SOURCE
    items = []
    for img_path in sorted((directory / "images").glob("*.png")):
        image_id = img_path.stem
        pixels = u8_to_pixels(np.asarray(Image.open(img_path).convert("RGB")))
        label_path = directory / "labels" / f"{image_id}.txt"
        boxes = parse_label_file(label_path) if label_path.is_file() else []
        items.append(LabeledImage(pixels, boxes, item_domain, image_id))
    return Dataset(items, domain, class_names)
