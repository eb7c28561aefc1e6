"""AP50 and the adaptation / robustness metric suite.

AP50 is VOC-style: per class, predictions sorted by confidence greedily match
unmatched ground truth at IoU >= 0.5, and the precision-recall curve is
integrated with all-point interpolation. The headline metrics are

* absolute gain  = adapted AP - source AP
* effective gain = 100 * (adapted - source) / (oracle - source)
* mPC            = mean over corruption kinds of the per-kind severity mean
* rPC            = mPC / clean AP
* relative robustness = adapted mPC - source mPC
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boxes import BoundingBox, iou_corners
from .data.corruption import CorruptionSpec, corrupt_dataset_single
from .data.datasets import Dataset
from .detector import Detection
from .errors import ConfigError, ContractViolation, GainUndefinedError, ParseError


# ---------------------------------------------------------------------------
# AP50

def _ap_from_pr(recall: np.ndarray, precision: np.ndarray) -> float:
    """All-point interpolation: area under the precision envelope."""
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    moved = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[moved + 1] - mrec[moved]) * mpre[moved + 1]))


def _class_ap(predictions: list[Detection], truth_by_image: dict[str, list],
              n_truth: int, iou_threshold: float) -> float:
    if n_truth == 0:
        return 0.0
    if not predictions:
        return 0.0
    confs = np.array([d.box.confidence for d in predictions])
    order = np.argsort(-confs, kind="stable")
    matched: dict[str, set[int]] = {}
    tp = np.zeros(len(order))
    fp = np.zeros(len(order))
    for rank, idx in enumerate(order):
        det = predictions[idx]
        candidates = truth_by_image.get(det.image_id, [])
        used = matched.setdefault(det.image_id, set())
        best_iou, best_j = 0.0, -1
        for j, gt in enumerate(candidates):
            if j in used:
                continue
            iou = iou_corners(det.box.corners, gt.corners)
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0 and best_iou >= iou_threshold:
            used.add(best_j)
            tp[rank] = 1.0
        else:
            fp[rank] = 1.0
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(fp)
    recall = tp_cum / n_truth
    precision = tp_cum / np.maximum(tp_cum + fp_cum, 1e-12)
    return _ap_from_pr(recall, precision)


def ap50(predictions: list[Detection], truth: Dataset,
         iou_threshold: float = 0.5) -> float:
    """Mean AP at IoU 0.5 over the classes that appear in the ground truth."""
    known = set(truth.ids)
    for det in predictions:
        if det.image_id not in known:
            raise ContractViolation(f"prediction for unknown image {det.image_id!r}")
    classes = sorted({b.class_id for item in truth for b in item.boxes})
    if not classes:
        return 0.0
    aps = []
    for c in classes:
        preds_c = [d for d in predictions if d.box.class_id == c]
        truth_c = {item.id: [b for b in item.boxes if b.class_id == c]
                   for item in truth}
        n_truth = sum(len(v) for v in truth_c.values())
        aps.append(_class_ap(preds_c, truth_c, n_truth, iou_threshold))
    return float(np.mean(aps))


# ---------------------------------------------------------------------------
# Gain metrics

@dataclass(frozen=True)
class GainReport:
    source_ap: float
    adapted_ap: float
    oracle_ap: float | None
    tau: float
    rho: float | None


def gain(source_ap: float, adapted_ap: float,
         oracle_ap: float | None = None) -> GainReport:
    """Absolute gain, and the effective gain as a percentage of the
    source-to-oracle gap when an oracle AP is supplied."""
    tau = adapted_ap - source_ap
    rho = None
    if oracle_ap is not None:
        if oracle_ap == source_ap:
            if adapted_ap != source_ap:
                raise GainUndefinedError(
                    "effective gain undefined: oracle equals source")
        else:
            rho = 100.0 * (adapted_ap - source_ap) / (oracle_ap - source_ap)
    return GainReport(source_ap, adapted_ap, oracle_ap, tau, rho)


# ---------------------------------------------------------------------------
# Robustness

@dataclass
class RobustnessReport:
    ap50_clean: float
    per_corruption: dict  # (kind, severity) -> AP50
    mpc: float | None
    rpc: float | None
    tau_c: float | None
    model_id: str = ""
    suite_id: str = ""
    extras: dict = field(default_factory=dict)


def aggregate_mpc(per_corruption: dict) -> float:
    """Mean over kinds of the per-kind mean over severities."""
    by_kind: dict[str, list[float]] = {}
    for (kind, _severity), ap in per_corruption.items():
        by_kind.setdefault(kind, []).append(ap)
    if not by_kind:
        raise ConfigError("empty corruption results")
    kind_means = [float(np.mean(v)) for _, v in sorted(by_kind.items())]
    return float(np.mean(kind_means))


def _check_suite_coverage(suite) -> None:
    by_kind: dict[str, set[int]] = {}
    for spec in suite:
        by_kind.setdefault(spec.kind, set()).add(spec.severity)
    for kind, sevs in sorted(by_kind.items()):
        if sevs != {1, 2, 3, 4, 5}:
            raise ConfigError(
                f"suite must cover all 5 severities for {kind!r}, has {sorted(sevs)}")


def robustness(predict_fn, clean_test: Dataset, suite: list[CorruptionSpec],
               rng_seed: int = 0, source_report: RobustnessReport | None = None,
               model_id: str = "", suite_id: str = "") -> RobustnessReport:
    """Evaluate AP50 on the clean test set and on each corrupted copy of it.

    ``predict_fn(dataset) -> list[Detection]`` so external detectors can be
    scored too. ``source_report`` enables the relative-robustness delta.
    """
    _check_suite_coverage(suite)
    clean_ap = ap50(predict_fn(clean_test), clean_test)
    per_corruption = {}
    for spec in suite:
        corrupted = corrupt_dataset_single(clean_test, spec, rng_seed)
        per_corruption[(spec.kind, spec.severity)] = ap50(
            predict_fn(corrupted), corrupted)
    mpc = aggregate_mpc(per_corruption)
    rpc = mpc / clean_ap if clean_ap > 0 else None
    tau_c = None
    if source_report is not None and source_report.mpc is not None:
        tau_c = mpc - source_report.mpc
    return RobustnessReport(clean_ap, per_corruption, mpc, rpc, tau_c,
                            model_id=model_id, suite_id=suite_id)


def clean_only_report(predict_fn, test: Dataset, model_id: str = "") -> RobustnessReport:
    """Just the AP50 of one test set, wrapped in the report container."""
    return RobustnessReport(ap50(predict_fn(test), test), {}, None, None, None,
                            model_id=model_id)


# ---------------------------------------------------------------------------
# Report serialization and rendering

def report_to_json(report: RobustnessReport) -> str:
    payload = {
        "ap50_clean": report.ap50_clean,
        "per_corruption": [
            {"kind": k, "severity": s, "ap50": ap}
            for (k, s), ap in sorted(report.per_corruption.items())
        ],
        "mpc": report.mpc,
        "rpc": report.rpc,
        "tau_c": report.tau_c,
        "model_id": report.model_id,
        "suite_id": report.suite_id,
        "extras": report.extras,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> RobustnessReport:
    try:
        payload = json.loads(text)
        per = {(e["kind"], int(e["severity"])): float(e["ap50"])
               for e in payload["per_corruption"]}
        return RobustnessReport(
            ap50_clean=float(payload["ap50_clean"]), per_corruption=per,
            mpc=None if payload["mpc"] is None else float(payload["mpc"]),
            rpc=None if payload["rpc"] is None else float(payload["rpc"]),
            tau_c=None if payload["tau_c"] is None else float(payload["tau_c"]),
            model_id=payload.get("model_id", ""),
            suite_id=payload.get("suite_id", ""),
            extras=payload.get("extras", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad report JSON: {exc}") from None


def _pct(x: float | None) -> str:
    return "-" if x is None else f"{100.0 * x:.2f}"


def render_report(report: RobustnessReport) -> str:
    """Plain-text table; values as percent with two decimals. Rendering is a
    pure function of the report, so re-rendering is byte-identical."""
    lines = []
    lines.append(f"model:  {report.model_id or '-'}")
    lines.append(f"suite:  {report.suite_id or '-'}")
    lines.append("")
    lines.append(f"{'corruption':<16} {'sev':>3} {'AP50':>7}")
    for (kind, sev), ap in sorted(report.per_corruption.items()):
        lines.append(f"{kind:<16} {sev:>3} {_pct(ap):>7}")
    lines.append("")
    lines.append(f"AP50_clean {_pct(report.ap50_clean):>7}")
    lines.append(f"mPC        {_pct(report.mpc):>7}")
    lines.append(f"rPC        {_pct(report.rpc):>7}")
    tau_c = "-" if report.tau_c is None else f"{100.0 * report.tau_c:+.2f}"
    lines.append(f"tau_c      {tau_c:>7}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Prediction interchange (image-id prefix + the 6-field record)

def save_predictions(detections: list[Detection], path) -> None:
    with open(path, "w") as fh:
        for det in detections:
            b = det.box
            fields = (repr(float(v)) for v in (b.cx, b.cy, b.w, b.h, b.confidence))
            fh.write(f"{det.image_id} {b.class_id} " + " ".join(fields) + "\n")


def load_predictions(path) -> list[Detection]:
    path = Path(path)
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 7:
                raise ParseError(f"{path}:{lineno}: expected 7 fields, got {len(fields)}")
            try:
                box = BoundingBox(int(fields[1]), *(float(v) for v in fields[2:6]),
                                  confidence=float(fields[6]))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            out.append(Detection(box, fields[0]))
    return out
