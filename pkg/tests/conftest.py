import numpy as np
import pytest

from simrod.adapt import AdaptConfig, train_source
from simrod.data import Dataset, ShapesConfig, generate_shapes_dataset
from simrod.detector import DetectorConfig


@pytest.fixture(scope="session")
def shapes_small():
    """60 images, 3 classes: enough for data-level tests."""
    return generate_shapes_dataset(ShapesConfig(n_images=60, rng_seed=42))


@pytest.fixture(scope="session")
def tiny_det_cfg():
    """A 2-block detector small enough for finite differences."""
    return DetectorConfig(n_classes=2, input_size=8, grid=2, channels=(4, 6))


@pytest.fixture(scope="session")
def trained_model():
    """One real (small) training run shared by the tests that need a model
    that actually detects: 200 images, ~30s. Returns (params, train_ds,
    held-out test_ds)."""
    train_ds = generate_shapes_dataset(ShapesConfig(n_images=200, rng_seed=7))
    test_ds = generate_shapes_dataset(ShapesConfig(n_images=60, rng_seed=8))
    cfg = AdaptConfig(T=22, N=20, B=12, lr=2e-2, rng_seed=1)
    from simrod.detector import student_config

    params, _record = train_source(train_ds, student_config(3), cfg)
    return params, train_ds, test_ds


def subset(ds: Dataset, n: int) -> Dataset:
    return Dataset(ds.items[:n], ds.domain, list(ds.class_names))
