"""Seed plumbing: every stage derives its rng from (seed, labels) by hashing,
so streams are independent, stable across runs, and platform-independent."""

from __future__ import annotations

import hashlib

import numpy as np


def stable_seed(*parts) -> int:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(*parts) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stable_seed(*parts)))
