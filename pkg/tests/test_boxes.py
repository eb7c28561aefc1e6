import numpy as np
import pytest

from simrod.boxes import BoundingBox, boxes_to_corner_array, iou_corners, pairwise_iou


def test_valid_box_roundtrips_corners():
    b = BoundingBox(1, 0.5, 0.4, 0.2, 0.3, confidence=0.9)
    x1, y1, x2, y2 = b.corners
    assert (x1, y1, x2, y2) == pytest.approx((0.4, 0.25, 0.6, 0.55))
    assert b.area == pytest.approx(0.06)


@pytest.mark.parametrize("kwargs", [
    dict(class_id=-1, cx=0.5, cy=0.5, w=0.1, h=0.1),
    dict(class_id=0, cx=1.2, cy=0.5, w=0.1, h=0.1),
    dict(class_id=0, cx=0.5, cy=-0.1, w=0.1, h=0.1),
    dict(class_id=0, cx=0.5, cy=0.5, w=0.0, h=0.1),
    dict(class_id=0, cx=0.5, cy=0.5, w=0.1, h=-0.2),
    dict(class_id=0, cx=0.5, cy=0.5, w=0.1, h=0.1, confidence=1.5),
])
def test_invalid_boxes_rejected(kwargs):
    with pytest.raises(ValueError):
        BoundingBox(**kwargs)


def test_edge_centered_box_is_valid():
    # center on the border still intersects the image with positive area
    b = BoundingBox(0, 0.0, 1.0, 0.2, 0.2)
    assert b.corners[0] < 0 < b.corners[2]


def test_confidence_helpers():
    b = BoundingBox(0, 0.5, 0.5, 0.1, 0.1)
    assert b.confidence is None
    assert b.with_confidence(0.7).confidence == 0.7
    assert b.with_confidence(0.7).without_confidence().confidence is None


def test_iou_corners_known_values():
    assert iou_corners((0, 0, 1, 1), (0, 0, 1, 1)) == 1.0
    assert iou_corners((0, 0, 1, 1), (2, 0, 3, 1)) == 0.0
    assert iou_corners((0, 0, 2, 2), (1, 1, 3, 3)) == pytest.approx(1 / 7)


def test_pairwise_iou_matches_scalar():
    rng = np.random.default_rng(0)
    a = rng.uniform(0, 1, size=(7, 2))
    aw = rng.uniform(0.05, 0.5, size=(7, 2))
    b = rng.uniform(0, 1, size=(5, 2))
    bw = rng.uniform(0.05, 0.5, size=(5, 2))
    ca = np.concatenate([a, a + aw], axis=1)
    cb = np.concatenate([b, b + bw], axis=1)
    mat = pairwise_iou(ca, cb)
    for i in range(7):
        for j in range(5):
            assert mat[i, j] == pytest.approx(iou_corners(ca[i], cb[j]))


def test_corner_array_empty_safe():
    assert boxes_to_corner_array([]).shape == (0, 4)
