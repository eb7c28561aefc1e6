"""Photometric corruptions with five severity levels.

All transforms touch pixels only, never boxes, so labels stay valid without
any remapping. Severity parameter tables live here and are monotone: level 5
is always the strongest. Outputs are snapped back to the 8-bit grid so that
corrupted datasets survive a disk round-trip exactly.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from ..errors import ConfigError, ParseError
from .datasets import TARGET, Dataset, LabeledImage, quantize_pixels

CORRUPTION_KINDS = ("gaussian_noise", "shot_noise", "defocus_blur",
                    "contrast", "brightness")

SEVERITY_PARAMS = {
    # noise sigma
    "gaussian_noise": (0.04, 0.07, 0.10, 0.16, 0.24),
    # photons per unit intensity; fewer photons = stronger noise
    "shot_noise": (60.0, 30.0, 16.0, 7.0, 3.0),
    # disk kernel radius in pixels
    "defocus_blur": (1.0, 1.8, 2.5, 4.0, 6.0),
    # contrast scale toward the mean; smaller = stronger
    "contrast": (0.75, 0.60, 0.50, 0.33, 0.18),
    # additive brightness shift
    "brightness": (0.07, 0.13, 0.20, 0.30, 0.40),
}


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    severity: int

    def __post_init__(self):
        if self.kind not in CORRUPTION_KINDS:
            raise ConfigError(f"unknown corruption kind {self.kind!r}")
        if self.severity not in (1, 2, 3, 4, 5):
            raise ConfigError(f"severity must be in 1..5, got {self.severity}")

    @property
    def param(self) -> float:
        return SEVERITY_PARAMS[self.kind][self.severity - 1]


def add_gaussian_noise(pixels: np.ndarray, sigma: float, rng) -> np.ndarray:
    noisy = pixels + rng.normal(0.0, sigma, size=pixels.shape)
    return np.clip(noisy, 0.0, 1.0)


def add_shot_noise(pixels: np.ndarray, photons: float, rng) -> np.ndarray:
    counts = rng.poisson(np.clip(pixels, 0, 1) * photons)
    return np.clip(counts / photons, 0.0, 1.0)


def defocus_blur(pixels: np.ndarray, radius: float) -> np.ndarray:
    yy, xx = np.mgrid[-int(np.ceil(radius)):int(np.ceil(radius)) + 1,
                      -int(np.ceil(radius)):int(np.ceil(radius)) + 1]
    kernel = (xx ** 2 + yy ** 2 <= radius ** 2 + 1e-9).astype(np.float64)
    kernel /= kernel.sum()
    out = np.empty_like(pixels, dtype=np.float64)
    for ch in range(pixels.shape[2]):
        out[:, :, ch] = ndimage.convolve(pixels[:, :, ch].astype(np.float64),
                                         kernel, mode="nearest")
    return np.clip(out, 0.0, 1.0)


def adjust_contrast(pixels: np.ndarray, factor: float) -> np.ndarray:
    mean = pixels.mean()
    return np.clip((pixels - mean) * factor + mean, 0.0, 1.0)


def adjust_brightness(pixels: np.ndarray, shift: float) -> np.ndarray:
    return np.clip(pixels + shift, 0.0, 1.0)


def _rng_for(rng_seed: int, image_id: str, spec: CorruptionSpec):
    digest = hashlib.sha256(
        f"{rng_seed}:{image_id}:{spec.kind}:{spec.severity}".encode()).digest()
    return np.random.Generator(np.random.PCG64(
        int.from_bytes(digest[:8], "little")))


def apply_corruption(img: LabeledImage, spec: CorruptionSpec,
                     rng_seed: int = 0) -> LabeledImage:
    """Corrupt one image. Boxes are untouched; the result is target-domain."""
    rng = _rng_for(rng_seed, img.id, spec)
    px = img.pixels.astype(np.float64)
    if spec.kind == "gaussian_noise":
        out = add_gaussian_noise(px, spec.param, rng)
    elif spec.kind == "shot_noise":
        out = add_shot_noise(px, spec.param, rng)
    elif spec.kind == "defocus_blur":
        out = defocus_blur(px, spec.param)
    elif spec.kind == "contrast":
        out = adjust_contrast(px, spec.param)
    elif spec.kind == "brightness":
        out = adjust_brightness(px, spec.param)
    else:  # unreachable, CorruptionSpec validates
        raise ConfigError(f"unknown corruption kind {spec.kind!r}")
    return replace(img, pixels=quantize_pixels(out), domain=TARGET,
                   boxes=list(img.boxes))


def corrupt_dataset_mixed(ds: Dataset, severity: int = 3, rng_seed: int = 0,
                          kinds=CORRUPTION_KINDS) -> Dataset:
    """Corrupt every image once, cycling through the kinds at one severity.

    This is the target-domain construction: a fixed severity per run, one
    corruption per image, assigned round-robin so all kinds appear.
    """
    items = [apply_corruption(item, CorruptionSpec(kinds[i % len(kinds)], severity),
                              rng_seed)
             for i, item in enumerate(ds.items)]
    return Dataset(items, TARGET, list(ds.class_names))


def corrupt_dataset_single(ds: Dataset, spec: CorruptionSpec,
                           rng_seed: int = 0) -> Dataset:
    """Apply one (kind, severity) to every image: a robustness-suite entry."""
    items = [apply_corruption(item, spec, rng_seed) for item in ds.items]
    return Dataset(items, TARGET, list(ds.class_names))


def corrupt_dataset_sweep(ds: Dataset, rng_seed: int = 0,
                          kinds=CORRUPTION_KINDS,
                          severities=(1, 2, 3, 4, 5)) -> Dataset:
    """Corrupt every image once, cycling over the full (kind, severity)
    grid. This is the test-set construction: severities are swept, unlike
    the fixed-severity training targets."""
    combos = [(k, s) for k in kinds for s in severities]
    items = []
    for i, item in enumerate(ds.items):
        kind, severity = combos[i % len(combos)]
        items.append(apply_corruption(item, CorruptionSpec(kind, severity), rng_seed))
    return Dataset(items, TARGET, list(ds.class_names))


def full_suite() -> list[CorruptionSpec]:
    """Every kind at every severity."""
    return [CorruptionSpec(kind, sev)
            for kind in CORRUPTION_KINDS for sev in (1, 2, 3, 4, 5)]


def parse_suite(path) -> list[CorruptionSpec]:
    """Read a suite file: one ``kind:severity`` per line, # comments allowed."""
    path = Path(path)
    specs = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split(":")
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected kind:severity, got {line!r}")
            kind, sev = parts[0].strip(), parts[1].strip()
            try:
                severity = int(sev)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad severity {sev!r}") from None
            try:
                specs.append(CorruptionSpec(kind, severity))
            except ConfigError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    return specs


def save_suite(specs, path) -> None:
    with open(path, "w") as fh:
        for spec in specs:
            fh.write(f"{spec.kind}:{spec.severity}\n")
