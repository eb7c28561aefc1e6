"""Run configuration: key=value text with section prefixes.

Every tunable of the pipeline lives here with a default; the checked-in
``configs/default.cfg`` states all of them. Unknown keys are rejected so a
typo can't silently fall back to a default. The top-level seed feeds every
stage through a stable per-stage hash, and SIMROD_SEED overrides it.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .adapt import AdaptConfig
from .data import ShapesConfig
from .detector import DetectorConfig
from .errors import ConfigError
from .utils import stable_seed


def _int(s): return int(s)
def _float(s): return float(s)
def _str(s): return s


def _bool(s):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s):
    return tuple(int(p) for p in s.split(",") if p.strip())


def _opt_int(s):
    return None if not s.strip() else int(s)


def _strs(s):
    return tuple(p.strip() for p in s.split(",") if p.strip())


SCHEMA = {
    "seed": (_int, 0),
    "paths.work_dir": (_str, "runs/demo"),

    "shapes.n_images": (_int, 480),
    "shapes.target_images": (_int, 480),
    "shapes.test_images": (_int, 160),
    "shapes.image_size": (_int, 96),
    "shapes.n_classes": (_int, 3),
    "shapes.objects_min": (_int, 1),
    "shapes.objects_max": (_int, 3),

    "detector.input_size": (_int, 96),
    "detector.grid": (_int, 12),
    "detector.channels": (_ints, (16, 32, 64, 64)),
    "detector.focal_gamma": (_float, 1.0),
    "detector.focal_alpha": (_float, 0.5),
    "detector.box_weight": (_float, 5.0),
    "detector.obj_weight": (_float, 64.0),
    "detector.cls_weight": (_float, 1.0),
    "detector.leaky_slope": (_float, 0.1),
    "detector.bn_momentum": (_float, 0.1),
    "detector.bn_eps": (_float, 1e-5),
    "detector.head_obj_bias": (_float, -4.0),
    "teacher.channels": (_ints, (32, 64, 128, 128)),

    "train.epochs": (_int, 25),
    "train.steps_per_epoch": (_int, 30),
    "train.batch_size": (_int, 12),
    "train.lr": (_float, 1e-3),

    "adapt.T": (_int, 10),
    "adapt.N": (_int, 24),
    "adapt.B": (_int, 8),
    "adapt.w": (_opt_int, None),
    "adapt.lr": (_float, 1e-3),
    "adapt.momentum": (_float, 0.937),
    "adapt.weight_decay": (_float, 5e-4),
    "adapt.conf_threshold": (_float, 0.4),
    "adapt.min_visible": (_float, 0.25),
    "adapt.val_fraction": (_float, 0.1),
    "adapt.lr_warmup_frac": (_float, 0.1),
    "adapt.lr_final_scale": (_float, 0.05),

    "corrupt.severity": (_int, 3),
    "corrupt.kinds": (_strs, ("gaussian_noise", "shot_noise", "defocus_blur",
                              "contrast", "brightness")),
    "eval.suite": (_str, ""),
}


@dataclass
class RunConfig:
    values: dict

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({k: d for k, (_p, d) in SCHEMA.items()})

    @classmethod
    def load(cls, path) -> "RunConfig":
        values = {k: d for k, (_p, d) in SCHEMA.items()}
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            parser, _default = SCHEMA[key]
            try:
                values[key] = parser(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
        return cls(values)

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        env = os.environ.get("SIMROD_SEED")
        if env is not None:
            try:
                return int(env)
            except ValueError:
                raise ConfigError(f"SIMROD_SEED must be an integer, got {env!r}") from None
        return self.values["seed"]

    def sub_seed(self, stage: str) -> int:
        return stable_seed(self.seed, stage)

    @property
    def work_dir(self) -> Path:
        return Path(self.values["paths.work_dir"])

    def shapes_config(self, split: str) -> ShapesConfig:
        counts = {"source_train": self["shapes.n_images"],
                  "target_clean": self["shapes.target_images"],
                  "clean_test": self["shapes.test_images"]}
        if split not in counts:
            raise ConfigError(f"unknown data split {split!r}")
        return ShapesConfig(
            n_images=counts[split], image_size=self["shapes.image_size"],
            n_classes=self["shapes.n_classes"],
            objects_min=self["shapes.objects_min"],
            objects_max=self["shapes.objects_max"],
            rng_seed=self.sub_seed(f"shapes:{split}"))

    def detector_config(self, model: str = "student") -> DetectorConfig:
        channels = self["teacher.channels"] if model == "teacher" \
            else self["detector.channels"]
        return DetectorConfig(
            n_classes=self["shapes.n_classes"],
            input_size=self["detector.input_size"],
            grid=self["detector.grid"],
            channels=channels,
            focal_gamma=self["detector.focal_gamma"],
            focal_alpha=self["detector.focal_alpha"],
            box_weight=self["detector.box_weight"],
            obj_weight=self["detector.obj_weight"],
            cls_weight=self["detector.cls_weight"],
            leaky_slope=self["detector.leaky_slope"],
            bn_momentum=self["detector.bn_momentum"],
            bn_eps=self["detector.bn_eps"],
            head_obj_bias=self["detector.head_obj_bias"])

    def train_config(self, stage: str) -> AdaptConfig:
        return AdaptConfig(
            T=self["train.epochs"], N=self["train.steps_per_epoch"],
            B=self["train.batch_size"], lr=self["train.lr"],
            momentum=self["adapt.momentum"],
            weight_decay=self["adapt.weight_decay"],
            val_fraction=self["adapt.val_fraction"],
            lr_warmup_frac=self["adapt.lr_warmup_frac"],
            lr_final_scale=self["adapt.lr_final_scale"],
            rng_seed=self.sub_seed(stage))

    def adapt_config(self, mode: str, stage: str) -> AdaptConfig:
        return AdaptConfig(
            T=self["adapt.T"], N=self["adapt.N"], B=self["adapt.B"],
            w=self["adapt.w"], lr=self["adapt.lr"],
            momentum=self["adapt.momentum"],
            weight_decay=self["adapt.weight_decay"],
            conf_threshold=self["adapt.conf_threshold"],
            min_visible=self["adapt.min_visible"],
            val_fraction=self["adapt.val_fraction"],
            lr_warmup_frac=self["adapt.lr_warmup_frac"],
            lr_final_scale=self["adapt.lr_final_scale"],
            rng_seed=self.sub_seed(stage)).with_mode(mode)

    def snapshot(self) -> str:
        """The resolved configuration as config-file text."""
        lines = []
        for key in SCHEMA:
            value = self.values[key]
            if value is None:
                value = ""
            elif isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"
