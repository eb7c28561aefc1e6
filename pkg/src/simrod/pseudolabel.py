"""Pseudo-label generation, thresholding, and the on-disk cache.

Pseudo-labels are always materialized between pipeline stages: a directory
mirroring the dataset ``labels/`` layout (confidence column mandatory) plus a
manifest naming the producer checkpoint and the threshold. Every target image
gets a file, empty when nothing cleared the threshold, so coverage is
checkable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .boxes import BoundingBox
from .data.datasets import TARGET, Dataset, format_label_record, parse_label_file
from .detector import NMS_IOU_THRESHOLD, PSEUDO_CONF_THRESHOLD, Detector, predict_dataset
from .errors import ContractViolation, ParseError


@dataclass
class PseudoLabelSet:
    """image id -> predicted boxes (confidence present, >= the threshold)."""

    labels: dict[str, list[BoundingBox]]
    producer: str
    conf_threshold: float

    def __post_init__(self):
        for image_id, boxes in self.labels.items():
            for b in boxes:
                if b.confidence is None:
                    raise ContractViolation(
                        f"pseudo-label without confidence for {image_id!r}")
                if b.confidence < self.conf_threshold:
                    raise ContractViolation(
                        f"pseudo-label below threshold for {image_id!r}")

    def verify_coverage(self, dataset: Dataset) -> None:
        """The set must cover exactly the dataset's ids (empty lists count)."""
        have = set(self.labels)
        want = set(dataset.ids)
        if have != want:
            missing = sorted(want - have)[:5]
            extra = sorted(have - want)[:5]
            raise ContractViolation(
                f"pseudo-label coverage mismatch: missing={missing} extra={extra}")

    def n_boxes(self) -> int:
        return sum(len(v) for v in self.labels.values())


def gen_pseudo(params_or_detector, target: Dataset,
               conf_threshold: float = PSEUDO_CONF_THRESHOLD) -> PseudoLabelSet:
    """Predict over the whole target set in eval mode and keep confident boxes.

    The model is read-only here; the target's own labels, if any, are never
    consulted.
    """
    if target.domain != TARGET:
        raise ContractViolation(
            f"pseudo-labels are for target data, got domain {target.domain!r}")
    detector = (params_or_detector if isinstance(params_or_detector, Detector)
                else Detector(params_or_detector))
    detections = predict_dataset(detector, target,
                                 conf_threshold=conf_threshold,
                                 nms_iou=NMS_IOU_THRESHOLD)
    labels: dict[str, list[BoundingBox]] = {item.id: [] for item in target}
    for det in detections:
        labels[det.image_id].append(det.box)
    return PseudoLabelSet(labels, detector.params.content_id(), conf_threshold)


def save_pseudo(pseudo: PseudoLabelSet, directory) -> None:
    directory = Path(directory)
    (directory / "labels").mkdir(parents=True, exist_ok=True)
    with open(directory / "manifest.txt", "w") as fh:
        fh.write(f"producer={pseudo.producer}\n")
        fh.write(f"conf_threshold={pseudo.conf_threshold}\n")
    for image_id, boxes in pseudo.labels.items():
        with open(directory / "labels" / f"{image_id}.txt", "w") as fh:
            for box in boxes:
                fh.write(format_label_record(box) + "\n")


def load_pseudo(directory, expected_ids=None) -> PseudoLabelSet:
    """Load a pseudo-label directory; records must carry a confidence. When
    ``expected_ids`` is given, coverage is checked against it."""
    directory = Path(directory)
    manifest = directory / "manifest.txt"
    if not manifest.is_file():
        raise ParseError(f"{manifest}: missing")
    fields = {}
    for lineno, line in enumerate(manifest.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        if "=" not in line:
            raise ParseError(f"{manifest}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
    try:
        producer = fields["producer"]
        conf_threshold = float(fields["conf_threshold"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{manifest}: {exc}") from None

    labels = {}
    for path in sorted((directory / "labels").glob("*.txt")):
        labels[path.stem] = parse_label_file(path, require_confidence=True)
    pseudo = PseudoLabelSet(labels, producer, conf_threshold)
    if expected_ids is not None:
        have, want = set(labels), set(expected_ids)
        if have != want:
            raise ContractViolation(
                f"pseudo-label coverage mismatch: missing={sorted(want - have)[:5]} "
                f"extra={sorted(have - want)[:5]}")
    return pseudo
