"""Parameter container, network forward/backward, and checkpoints.

Every tensor carries exactly one tag:

* ``bn_affine``   -- batch-norm scale/shift, the only thing Phase 1 trains
* ``bn_running``  -- batch-norm statistics, never trainable
* ``conv_or_head``-- everything else

The raw head output is (B, grid, grid, 5 + n_classes) per image: four box
logits (tx, ty, tw, th), an objectness logit, then class logits.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ContractViolation
from . import layers
from .config import DetectorConfig

TAG_BN_AFFINE = "bn_affine"
TAG_BN_RUNNING = "bn_running"
TAG_CONV = "conv_or_head"
_TAGS = (TAG_BN_AFFINE, TAG_BN_RUNNING, TAG_CONV)


@dataclass
class ModelParams:
    """Named tensors plus their tags and trainability flags."""

    arrays: dict[str, np.ndarray]
    tags: dict[str, str]
    trainable: dict[str, bool]
    config: DetectorConfig

    def __post_init__(self):
        for name in self.arrays:
            tag = self.tags.get(name)
            if tag not in _TAGS:
                raise ContractViolation(f"tensor {name!r} has bad tag {tag!r}")
            if tag == TAG_BN_RUNNING and self.trainable.get(name, False):
                raise ContractViolation(f"running stat {name!r} marked trainable")
            if name not in self.trainable:
                raise ContractViolation(f"tensor {name!r} missing trainable flag")
        if set(self.arrays) != set(self.tags) or set(self.arrays) != set(self.trainable):
            raise ContractViolation("arrays / tags / trainable keys differ")

    @property
    def names(self) -> list[str]:
        return sorted(self.arrays)

    def trainable_names(self) -> list[str]:
        return [n for n in self.names if self.trainable[n]]

    def clone(self) -> "ModelParams":
        return ModelParams({n: a.copy() for n, a in self.arrays.items()},
                           dict(self.tags), dict(self.trainable), self.config)

    def content_id(self) -> str:
        """Stable fingerprint of the tensor contents."""
        h = hashlib.sha256()
        for name in self.names:
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.arrays[name]).tobytes())
        return h.hexdigest()[:12]


def partition_params(params: ModelParams) -> tuple[set[str], set[str]]:
    """Split trainable tensors into (bn_affine, frozen-in-Phase-1)."""
    bn, frozen = set(), set()
    for name in params.trainable_names():
        tag = params.tags[name]
        if tag == TAG_BN_AFFINE:
            bn.add(name)
        else:
            frozen.add(name)
    return bn, frozen


def init_params(cfg: DetectorConfig, rng_seed: int = 0,
                dtype=np.float32) -> ModelParams:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        (0x5EED, rng_seed))))
    arrays: dict[str, np.ndarray] = {}
    tags: dict[str, str] = {}
    trainable: dict[str, bool] = {}

    def add(name, arr, tag, train):
        arrays[name] = arr.astype(dtype)
        tags[name] = tag
        trainable[name] = train

    in_ch = 3
    for i, out_ch in enumerate(cfg.channels):
        fan_in = in_ch * 9
        std = np.sqrt(2.0 / ((1.0 + cfg.leaky_slope ** 2) * fan_in))
        add(f"conv{i}.w", rng.normal(0.0, std, size=(out_ch, in_ch, 3, 3)),
            TAG_CONV, True)
        add(f"bn{i}.gamma", np.ones(out_ch), TAG_BN_AFFINE, True)
        add(f"bn{i}.beta", np.zeros(out_ch), TAG_BN_AFFINE, True)
        add(f"bn{i}.running_mean", np.zeros(out_ch), TAG_BN_RUNNING, False)
        add(f"bn{i}.running_var", np.ones(out_ch), TAG_BN_RUNNING, False)
        in_ch = out_ch

    head_out = cfg.head_channels
    add("head.w", rng.normal(0.0, 0.01, size=(head_out, in_ch, 1, 1)),
        TAG_CONV, True)
    bias = np.zeros(head_out)
    bias[4] = cfg.head_obj_bias  # start objectness rare, like a detection prior
    add("head.b", bias, TAG_CONV, True)
    return ModelParams(arrays, tags, trainable, cfg)


class Detector:
    """The network. Owns a ModelParams and runs forward / backward on it."""

    def __init__(self, params: ModelParams):
        self.params = params

    @property
    def config(self) -> DetectorConfig:
        return self.params.config

    def forward(self, x: np.ndarray, training: bool = False,
                with_cache: bool = False):
        """x: (B, 3, S, S) float. Returns raw (B, G, G, 5+C); with_cache also
        returns what backward() needs."""
        cfg = self.config
        if x.ndim != 4 or x.shape[1] != 3 or x.shape[2] != cfg.input_size \
                or x.shape[3] != cfg.input_size:
            raise ContractViolation(
                f"expected (B, 3, {cfg.input_size}, {cfg.input_size}), got {x.shape}")
        a = self.params.arrays
        caches = []
        h = x.astype(a["conv0.w"].dtype, copy=False)
        for i in range(len(cfg.channels)):
            h, c_conv = layers.conv_forward(h, a[f"conv{i}.w"],
                                            stride=cfg.block_stride(i), pad=1)
            h, c_bn = layers.bn_forward(h, a[f"bn{i}.gamma"], a[f"bn{i}.beta"],
                                        a[f"bn{i}.running_mean"],
                                        a[f"bn{i}.running_var"], training,
                                        momentum=cfg.bn_momentum, eps=cfg.bn_eps)
            h, c_act = layers.leaky_relu_forward(h, cfg.leaky_slope)
            caches.append((c_conv, c_bn, c_act))
        h, c_head = layers.conv_forward(h, a["head.w"], a["head.b"])
        raw = np.ascontiguousarray(h.transpose(0, 2, 3, 1))
        if with_cache:
            return raw, (caches, c_head)
        return raw

    def backward(self, cache, draw: np.ndarray) -> dict[str, np.ndarray]:
        """draw: gradient wrt the raw output. Returns per-tensor gradients."""
        cfg = self.config
        caches, c_head = cache
        grads: dict[str, np.ndarray] = {}
        dh = np.ascontiguousarray(draw.transpose(0, 3, 1, 2))
        dh, grads["head.w"], grads["head.b"] = layers.conv_backward(c_head, dh)
        for i in reversed(range(len(cfg.channels))):
            c_conv, c_bn, c_act = caches[i]
            dh = layers.leaky_relu_backward(c_act, dh)
            dh, grads[f"bn{i}.gamma"], grads[f"bn{i}.beta"] = \
                layers.bn_backward(c_bn, dh)
            dh, grads[f"conv{i}.w"], _ = layers.conv_backward(c_conv, dh)
        return grads


def save_checkpoint(params: ModelParams, path, meta: dict | None = None) -> None:
    payload = {f"arr.{n}": a for n, a in params.arrays.items()}
    payload["__tags__"] = np.str_(json.dumps(params.tags))
    payload["__trainable__"] = np.str_(json.dumps(params.trainable))
    payload["__config__"] = np.str_(json.dumps(asdict(params.config)))
    payload["__meta__"] = np.str_(json.dumps(meta or {}))
    np.savez_compressed(path, **payload)


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    with np.load(path, allow_pickle=False) as z:
        tags = json.loads(str(z["__tags__"]))
        trainable = json.loads(str(z["__trainable__"]))
        cfg_dict = json.loads(str(z["__config__"]))
        meta = json.loads(str(z["__meta__"]))
        arrays = {k[4:]: z[k].copy() for k in z.files if k.startswith("arr.")}
    cfg_dict["channels"] = tuple(cfg_dict["channels"])
    config = DetectorConfig(**cfg_dict)
    return ModelParams(arrays, tags, trainable, config), meta
