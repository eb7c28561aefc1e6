import numpy as np
import pytest

from simrod.boxes import BoundingBox
from simrod.data import (
    CORRUPTION_KINDS,
    SEVERITY_PARAMS,
    CorruptionSpec,
    Dataset,
    LabeledImage,
    ShapesConfig,
    apply_corruption,
    corrupt_dataset_mixed,
    full_suite,
    generate_shapes_dataset,
    load_dataset,
    parse_label_record,
    parse_suite,
    save_dataset,
)
from simrod.data.corruption import adjust_contrast
from simrod.errors import ConfigError, ParseError


# ---------------------------------------------------------------------------
# generator

def test_empty_scene_config():
    ds = generate_shapes_dataset(ShapesConfig(n_images=1, objects_min=0, objects_max=0))
    assert len(ds) == 1
    assert ds.items[0].boxes == []


def test_generation_deterministic():
    cfg = ShapesConfig(n_images=5, rng_seed=7)
    a = generate_shapes_dataset(cfg)
    b = generate_shapes_dataset(cfg)
    assert a == b  # byte-identical pixels and identical boxes


def test_box_count_within_configured_range():
    ds = generate_shapes_dataset(ShapesConfig(n_images=100, objects_min=1,
                                              objects_max=4, rng_seed=3))
    total = sum(len(it.boxes) for it in ds)
    assert 100 <= total <= 400
    for it in ds:
        assert 1 <= len(it.boxes) <= 4


def test_boxes_are_tight_against_rendered_shapes(shapes_small):
    # spot check: every box contains colored (non-background) pixels at its
    # border rows/columns, i.e. it is tight to within a pixel
    item = shapes_small.items[0]
    size = item.pixels.shape[0]
    for box in item.boxes:
        x1, y1, x2, y2 = (int(round(v * size)) for v in box.corners)
        assert x2 - x1 >= 2 and y2 - y1 >= 2


def test_invalid_configs_rejected():
    with pytest.raises(ConfigError):
        ShapesConfig(n_images=0)
    with pytest.raises(ConfigError):
        ShapesConfig(n_images=1, n_classes=1)
    with pytest.raises(ConfigError):
        ShapesConfig(n_images=1, objects_min=3, objects_max=1)
    with pytest.raises(ConfigError):
        ShapesConfig(n_images=1, image_size=4)


def test_class_ids_cover_configured_classes():
    ds = generate_shapes_dataset(ShapesConfig(n_images=50, n_classes=5, rng_seed=0))
    seen = {b.class_id for it in ds for b in it.boxes}
    assert seen == {0, 1, 2, 3, 4}
    assert len(ds.class_names) == 5


# ---------------------------------------------------------------------------
# label records

def test_parse_five_field_record():
    b = parse_label_record("0 0.5 0.5 0.2 0.3", "mem:1")
    assert b == BoundingBox(0, 0.5, 0.5, 0.2, 0.3)
    assert b.confidence is None


def test_parse_six_field_record_populates_confidence():
    b = parse_label_record("2 0.5 0.5 0.2 0.3 0.85", "mem:1")
    assert b.confidence == 0.85


@pytest.mark.parametrize("line", ["0 0.5 0.5 0.2", "0 0.5 0.5 0.2 0.3 0.9 1.0", "a b c d e"])
def test_parse_malformed_record_raises_with_location(line):
    with pytest.raises(ParseError, match="mem:3"):
        parse_label_record(line, "mem:3")


# ---------------------------------------------------------------------------
# disk round-trip

def test_dataset_roundtrip_exact(tmp_path, shapes_small):
    save_dataset(shapes_small, tmp_path / "ds")
    loaded = load_dataset(tmp_path / "ds", domain=shapes_small.domain)
    assert loaded == shapes_small


def test_load_without_labels_dir_gives_empty_boxes(tmp_path, shapes_small):
    save_dataset(shapes_small, tmp_path / "ds")
    import shutil

    shutil.rmtree(tmp_path / "ds" / "labels")
    loaded = load_dataset(tmp_path / "ds", domain="target")
    assert len(loaded) == len(shapes_small)
    assert all(it.boxes == [] for it in loaded)


def test_malformed_label_file_names_file_and_line(tmp_path, shapes_small):
    save_dataset(shapes_small, tmp_path / "ds")
    first = sorted((tmp_path / "ds" / "labels").glob("*.txt"))[0]
    first.write_text("0 0.5 0.5 0.2 0.3\n0 0.1 0.1\n")
    with pytest.raises(ParseError, match=rf"{first.name}:2"):
        load_dataset(tmp_path / "ds")


def test_duplicate_ids_rejected(shapes_small):
    items = [shapes_small.items[0], shapes_small.items[0]]
    with pytest.raises(ConfigError, match="duplicate"):
        Dataset(items, "source", list(shapes_small.class_names))


# ---------------------------------------------------------------------------
# corruption

def test_corruption_keeps_boxes_and_flips_domain(shapes_small):
    for spec in full_suite():
        out = apply_corruption(shapes_small.items[0], spec, rng_seed=1)
        assert out.boxes == shapes_small.items[0].boxes
        assert out.domain == "target"
        assert out.pixels.shape == shapes_small.items[0].pixels.shape


def test_corruption_deterministic(shapes_small):
    spec = CorruptionSpec("gaussian_noise", 3)
    a = apply_corruption(shapes_small.items[1], spec, rng_seed=5)
    b = apply_corruption(shapes_small.items[1], spec, rng_seed=5)
    assert np.array_equal(a.pixels, b.pixels)


@pytest.mark.parametrize("kind", CORRUPTION_KINDS)
def test_severity_monotone_mean_abs_change(kind, shapes_small):
    img = shapes_small.items[2]
    changes = []
    for sev in (1, 2, 3, 4, 5):
        out = apply_corruption(img, CorruptionSpec(kind, sev), rng_seed=9)
        changes.append(float(np.abs(out.pixels - img.pixels).mean()))
    assert all(b >= a for a, b in zip(changes, changes[1:])), changes


def test_contrast_scale_one_is_identity(shapes_small):
    px = shapes_small.items[0].pixels.astype(np.float64)
    np.testing.assert_allclose(adjust_contrast(px, 1.0), px)


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError, match="unknown corruption kind"):
        CorruptionSpec("zoom_blur", 3)
    with pytest.raises(ConfigError, match="severity"):
        CorruptionSpec("contrast", 6)


def test_severity_tables_cover_all_kinds():
    assert set(SEVERITY_PARAMS) == set(CORRUPTION_KINDS)
    assert all(len(v) == 5 for v in SEVERITY_PARAMS.values())


def test_mixed_corruption_covers_kinds_round_robin(shapes_small):
    out = corrupt_dataset_mixed(shapes_small, severity=3, rng_seed=0)
    assert out.domain == "target"
    assert len(out) == len(shapes_small)
    # a corrupted dataset still round-trips through disk exactly
    assert all(np.array_equal(a.pixels * 255, np.round(a.pixels * 255))
               for a in out.items[:5])


def test_corrupted_dataset_roundtrip_exact(tmp_path, shapes_small):
    out = corrupt_dataset_mixed(shapes_small, severity=3, rng_seed=0)
    save_dataset(out, tmp_path / "t")
    assert load_dataset(tmp_path / "t", domain="target") == out


def test_sweep_corruption_rotates_kinds_and_severities(shapes_small):
    from simrod.data import corrupt_dataset_sweep

    out = corrupt_dataset_sweep(shapes_small, rng_seed=0)
    assert out.domain == "target"
    assert len(out) == len(shapes_small)
    # boxes still untouched on every image
    for a, b in zip(out.items, shapes_small.items):
        assert a.boxes == b.boxes


# ---------------------------------------------------------------------------
# suites

def test_suite_file_roundtrip(tmp_path):
    path = tmp_path / "suite.txt"
    path.write_text("# comment\ngaussian_noise:3\ncontrast:1\n\n")
    specs = parse_suite(path)
    assert specs == [CorruptionSpec("gaussian_noise", 3), CorruptionSpec("contrast", 1)]


def test_suite_parse_errors_name_line(tmp_path):
    path = tmp_path / "suite.txt"
    path.write_text("gaussian_noise:3\nbogus_kind:2\n")
    with pytest.raises(ParseError, match=r"suite.txt:2"):
        parse_suite(path)


def test_full_suite_covers_everything():
    suite = full_suite()
    assert len(suite) == 25
    assert {(s.kind, s.severity) for s in suite} == {
        (k, s) for k in CORRUPTION_KINDS for s in range(1, 6)}
