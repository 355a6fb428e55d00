"""Detection evaluation: greedy IoU matching, AP, mAP, and sequence accuracy.

Matching is greedy per image: predictions are visited by descending
confidence, and a prediction is a true positive exactly when its best-IoU
still-unmatched ground truth of the same class reaches the IoU threshold
(which then consumes that ground truth). Average precision is the 101-point
interpolated area under the precision-recall curve with the right-to-left
precision envelope; mAP50 averages per-class AP at IoU 0.50 over classes that
have at least one ground truth, and mAP50-95 additionally averages over the
ten IoU thresholds 0.50, 0.55, ..., 0.95.

Accumulation across images is order-independent: detections are re-sorted
globally with a canonical tie-break before any curve is built, so workers may
evaluate images in any order and merge.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import PlateflowError
from .geometry import BBox, iou
from .postprocess import Detection

REPORT_SCHEMA = "plateflow/report/1"

IOU_THRESHOLDS_50_95 = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
RECALL_POINTS = np.linspace(0.0, 1.0, 101)


class MetricsError(PlateflowError):
    """Inconsistent evaluation input."""


class InfiniteLossError(MetricsError):
    """Classification loss is unbounded: zero probability at the true class."""


GroundTruth = tuple[int, BBox]


@dataclass(frozen=True)
class DetectionOutcome:
    """One prediction's matching fate, at every evaluated IoU threshold."""

    confidence: float
    class_id: int
    box: BBox
    tp: tuple[bool, ...]
    matched_gt: tuple[int, ...]  # ground-truth index per threshold, -1 when FP

    @property
    def sort_key(self):
        # Canonical order: confidence descending, then content, so global
        # accumulation does not depend on image order.
        return (-self.confidence, self.class_id, self.box.x1, self.box.y1, self.box.x2, self.box.y2, self.tp)


@dataclass(frozen=True)
class MatchResult:
    """Greedy matching of one image's predictions against its ground truth."""

    thresholds: tuple[float, ...]
    outcomes: tuple[DetectionOutcome, ...]
    gt_counts: dict[int, int]


def _match_order_key(det: Detection):
    return (-det.confidence, det.box.x1, det.box.y1, det.class_id)


def match(
    preds: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_thr: float | Sequence[float] = 0.5,
    *,
    num_classes: int | None = None,
) -> MatchResult:
    """Greedily match one image's predictions to its ground-truth boxes.

    ``iou_thr`` may be a single threshold or a sequence; matching runs
    independently per threshold. Predictions and ground truth must share one
    coordinate space and class map.
    """
    thresholds = (iou_thr,) if isinstance(iou_thr, (int, float)) else tuple(iou_thr)
    if not thresholds:
        raise MetricsError("at least one IoU threshold is required")
    for t in thresholds:
        if not 0.0 <= t <= 1.0:
            raise MetricsError(f"IoU threshold {t} outside [0,1]")
    if num_classes is not None:
        for det in preds:
            if det.class_id >= num_classes:
                raise MetricsError(f"prediction class id {det.class_id} outside class map of size {num_classes}")
        for class_id, _ in gts:
            if not 0 <= class_id < num_classes:
                raise MetricsError(f"ground-truth class id {class_id} outside class map of size {num_classes}")

    gt_counts: dict[int, int] = {}
    for class_id, _ in gts:
        gt_counts[class_id] = gt_counts.get(class_id, 0) + 1

    ordered = sorted(preds, key=_match_order_key)
    taken = [[False] * len(gts) for _ in thresholds]
    outcomes = []
    for det in ordered:
        tp_flags = []
        matched_ids = []
        for t_index, threshold in enumerate(thresholds):
            best_iou = 0.0
            best_gt = -1
            for gt_index, (gt_class, gt_box) in enumerate(gts):
                if gt_class != det.class_id or taken[t_index][gt_index]:
                    continue
                overlap = iou(det.box, gt_box)
                if overlap > best_iou:
                    best_iou = overlap
                    best_gt = gt_index
            if best_gt >= 0 and best_iou >= threshold:
                taken[t_index][best_gt] = True
                tp_flags.append(True)
                matched_ids.append(best_gt)
            else:
                tp_flags.append(False)
                matched_ids.append(-1)
        outcomes.append(
            DetectionOutcome(det.confidence, det.class_id, det.box, tuple(tp_flags), tuple(matched_ids))
        )
    return MatchResult(thresholds, tuple(outcomes), gt_counts)


def _interpolated_ap(tp_sorted: np.ndarray, n_gt: int) -> float:
    """101-point interpolated AP from TP flags in confidence-descending order."""
    if n_gt <= 0:
        raise MetricsError("AP is undefined without ground truth")
    n = len(tp_sorted)
    if n == 0:
        return 0.0
    tp_cum = np.cumsum(tp_sorted, dtype=np.float64)
    recall = tp_cum / n_gt
    precision = tp_cum / np.arange(1, n + 1, dtype=np.float64)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    indices = np.searchsorted(recall, RECALL_POINTS, side="left")
    sampled = np.where(indices < n, envelope[np.minimum(indices, n - 1)], 0.0)
    return float(sampled.mean())


def _class_records(
    results: Iterable[MatchResult], class_id: int, threshold_index: int
) -> tuple[np.ndarray, int]:
    outcomes = [o for r in results for o in r.outcomes if o.class_id == class_id]
    outcomes.sort(key=lambda o: o.sort_key)
    tp = np.array([o.tp[threshold_index] for o in outcomes], dtype=bool)
    n_gt = sum(r.gt_counts.get(class_id, 0) for r in results)
    return tp, n_gt


def average_precision(
    results: Sequence[MatchResult], class_id: int, *, threshold: float = 0.5
) -> float | None:
    """Cross-image AP for one class at one IoU threshold; None without ground truth."""
    if not results:
        return None
    thresholds = results[0].thresholds
    for r in results:
        if r.thresholds != thresholds:
            raise MetricsError("all match results must share the same IoU thresholds")
    try:
        t_index = thresholds.index(threshold)
    except ValueError:
        raise MetricsError(f"threshold {threshold} was not evaluated; have {thresholds}") from None
    tp, n_gt = _class_records(results, class_id, t_index)
    if n_gt == 0:
        return None
    return _interpolated_ap(tp, n_gt)


@dataclass(frozen=True)
class EvalConfig:
    iou_thresholds: tuple[float, ...] = IOU_THRESHOLDS_50_95
    fixed_confidence: float = 0.25

    def __post_init__(self) -> None:
        if 0.5 not in self.iou_thresholds:
            raise ValueError("evaluation requires the 0.50 IoU threshold")
        if not 0.0 <= self.fixed_confidence <= 1.0:
            raise ValueError(f"fixed_confidence {self.fixed_confidence} outside [0,1]")


@dataclass
class EvalReport:
    """Aggregate evaluation metrics plus the configuration that produced them."""

    num_classes: int
    classes_evaluated: tuple[int, ...]
    ap50: dict[int, float]
    ap50_95: dict[int, float]
    map50: float | None
    map50_95: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    f1_confidence: float | None
    precision_fixed: float | None
    recall_fixed: float | None
    no_ground_truth: bool
    config: dict
    sequence_accuracy: float | None = None
    class_names: tuple[str, ...] | None = None

    def to_json(self) -> dict:
        def r6(value: float | None) -> float | None:
            return None if value is None else round(float(value), 6)

        return {
            "schema": REPORT_SCHEMA,
            "num_classes": self.num_classes,
            "classes_evaluated": list(self.classes_evaluated),
            "ap50": {str(k): r6(v) for k, v in sorted(self.ap50.items())},
            "ap50_95": {str(k): r6(v) for k, v in sorted(self.ap50_95.items())},
            "map50": r6(self.map50),
            "map50_95": r6(self.map50_95),
            "precision": r6(self.precision),
            "recall": r6(self.recall),
            "f1": r6(self.f1),
            "f1_confidence": r6(self.f1_confidence),
            "precision_fixed": r6(self.precision_fixed),
            "recall_fixed": r6(self.recall_fixed),
            "sequence_accuracy": r6(self.sequence_accuracy),
            "no_ground_truth": self.no_ground_truth,
            "config": self.config,
        }

    def per_class_rows(self) -> list[dict]:
        rows = []
        for class_id in self.classes_evaluated:
            name = self.class_names[class_id] if self.class_names else str(class_id)
            rows.append(
                {
                    "class_id": class_id,
                    "name": name,
                    "ap50": round(self.ap50[class_id], 6),
                    "ap50_95": round(self.ap50_95[class_id], 6),
                }
            )
        return rows

    def write_csv(self, fh) -> None:
        writer = csv.DictWriter(fh, fieldnames=["class_id", "name", "ap50", "ap50_95"])
        writer.writeheader()
        for row in self.per_class_rows():
            writer.writerow(row)


def _pr_at_cutoffs(
    confidences: np.ndarray, tp_cum: np.ndarray, n_gt: int, cutoffs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Precision/recall for one class at each confidence cutoff.

    ``confidences`` must be sorted descending with ``tp_cum`` aligned. With no
    detection at or above a cutoff, precision is vacuously 1 and recall 0.
    """
    n = len(confidences)
    counts = np.searchsorted(-confidences, -cutoffs, side="right")
    precision = np.ones_like(cutoffs, dtype=np.float64)
    recall = np.zeros_like(cutoffs, dtype=np.float64)
    nonzero = counts > 0
    if n and nonzero.any():
        k = counts[nonzero]
        precision[nonzero] = tp_cum[k - 1] / k
        recall[nonzero] = tp_cum[k - 1] / n_gt
    return precision, recall


def map_suite(
    preds_per_image: Sequence[Sequence[Detection]],
    gts_per_image: Sequence[Sequence[GroundTruth]],
    *,
    num_classes: int,
    config: EvalConfig | None = None,
    class_names: Sequence[str] | None = None,
) -> EvalReport:
    """Evaluate a whole prediction set against its ground truth.

    Headline precision/recall are macro-averaged over classes with ground
    truth, reported at the confidence maximizing F1 and again at the fixed
    configured confidence.
    """
    if len(preds_per_image) != len(gts_per_image):
        raise MetricsError(
            f"got {len(preds_per_image)} prediction lists vs {len(gts_per_image)} ground-truth lists"
        )
    cfg = config or EvalConfig()
    results = [
        match(preds, gts, cfg.iou_thresholds, num_classes=num_classes)
        for preds, gts in zip(preds_per_image, gts_per_image)
    ]
    t50 = cfg.iou_thresholds.index(0.5)

    classes_with_gt = sorted(
        {class_id for r in results for class_id, count in r.gt_counts.items() if count > 0}
    )
    config_echo = {
        "iou_thresholds": [round(t, 2) for t in cfg.iou_thresholds],
        "recall_interpolation_points": len(RECALL_POINTS),
        "fixed_confidence": cfg.fixed_confidence,
        "matching": "greedy-best-iou-unmatched",
    }

    if not classes_with_gt:
        return EvalReport(
            num_classes=num_classes,
            classes_evaluated=(),
            ap50={},
            ap50_95={},
            map50=None,
            map50_95=None,
            precision=None,
            recall=None,
            f1=None,
            f1_confidence=None,
            precision_fixed=None,
            recall_fixed=None,
            no_ground_truth=True,
            config=config_echo,
            class_names=tuple(class_names) if class_names else None,
        )

    ap50: dict[int, float] = {}
    ap50_95: dict[int, float] = {}
    for class_id in classes_with_gt:
        aps = []
        for t_index in range(len(cfg.iou_thresholds)):
            tp, n_gt = _class_records(results, class_id, t_index)
            aps.append(_interpolated_ap(tp, n_gt))
        ap50[class_id] = aps[t50]
        ap50_95[class_id] = float(np.mean(aps))

    # Headline P/R sweep over every observed confidence (max-F1 operating point).
    curves: dict[int, tuple[np.ndarray, np.ndarray, int]] = {}
    for class_id in classes_with_gt:
        outcomes = [o for r in results for o in r.outcomes if o.class_id == class_id]
        outcomes.sort(key=lambda o: o.sort_key)
        confs = np.array([o.confidence for o in outcomes], dtype=np.float64)
        tp_cum = np.cumsum([o.tp[t50] for o in outcomes], dtype=np.float64)
        n_gt = sum(r.gt_counts.get(class_id, 0) for r in results)
        curves[class_id] = (confs, tp_cum, n_gt)

    all_confs = sorted({float(c) for confs, _, _ in curves.values() for c in confs}, reverse=True)
    grid = np.array(all_confs if all_confs else [1.0], dtype=np.float64)
    precision_grid = np.zeros((len(classes_with_gt), len(grid)))
    recall_grid = np.zeros_like(precision_grid)
    fixed_p = np.zeros(len(classes_with_gt))
    fixed_r = np.zeros(len(classes_with_gt))
    fixed_cut = np.array([cfg.fixed_confidence], dtype=np.float64)
    for row, class_id in enumerate(classes_with_gt):
        confs, tp_cum, n_gt = curves[class_id]
        precision_grid[row], recall_grid[row] = _pr_at_cutoffs(confs, tp_cum, n_gt, grid)
        fp, fr = _pr_at_cutoffs(confs, tp_cum, n_gt, fixed_cut)
        fixed_p[row], fixed_r[row] = fp[0], fr[0]

    mean_p = precision_grid.mean(axis=0)
    mean_r = recall_grid.mean(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        f1_curve = np.where(mean_p + mean_r > 0, 2 * mean_p * mean_r / (mean_p + mean_r), 0.0)
    best = int(np.argmax(f1_curve))  # grid is confidence-descending; argmax takes the highest cutoff on ties

    map50 = float(np.mean([ap50[c] for c in classes_with_gt]))
    map50_95 = float(np.mean([ap50_95[c] for c in classes_with_gt]))
    return EvalReport(
        num_classes=num_classes,
        classes_evaluated=tuple(classes_with_gt),
        ap50=ap50,
        ap50_95=ap50_95,
        map50=map50,
        map50_95=map50_95,
        precision=float(mean_p[best]),
        recall=float(mean_r[best]),
        f1=float(f1_curve[best]),
        f1_confidence=float(grid[best]),
        precision_fixed=float(fixed_p.mean()),
        recall_fixed=float(fixed_r.mean()),
        no_ground_truth=False,
        config=config_echo,
        class_names=tuple(class_names) if class_names else None,
    )


@dataclass(frozen=True)
class SequenceAccuracy:
    """Exact-match accuracy of predicted plate strings against ground truth."""

    accuracy: float | None
    matched: int
    total_truth: int
    mismatches: tuple[tuple[str, str | None, str], ...]  # (id, predicted, truth)
    extra_predictions: tuple[str, ...]


def sequence_accuracy(
    predicted: Mapping[str, str], truth: Mapping[str, str]
) -> SequenceAccuracy:
    """Fraction of truth plates whose predicted text matches exactly.

    Truth ids with no prediction count as mismatches; predictions with no
    truth id are reported separately and do not enter the fraction.
    """
    mismatches = []
    matched = 0
    for plate_id in sorted(truth):
        expected = truth[plate_id]
        got = predicted.get(plate_id)
        if got == expected:
            matched += 1
        else:
            mismatches.append((plate_id, got, expected))
    extra = tuple(sorted(set(predicted) - set(truth)))
    total = len(truth)
    return SequenceAccuracy(
        accuracy=(matched / total) if total else None,
        matched=matched,
        total_truth=total,
        mismatches=tuple(mismatches),
        extra_predictions=extra,
    )


@dataclass(frozen=True)
class LossSample:
    """One diagnostic sample for the classification and box regression losses."""

    y: tuple[float, ...]
    p: tuple[float, ...]
    coords_true: tuple[float, ...]
    coords_pred: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.y) != len(self.p):
            raise MetricsError(f"label vector length {len(self.y)} != probability length {len(self.p)}")
        if sorted(self.y) != [0.0] * (len(self.y) - 1) + [1.0]:
            raise MetricsError("y must be one-hot")
        for value in self.p:
            if not 0.0 <= value <= 1.0 or not math.isfinite(value):
                raise MetricsError(f"probability {value} outside [0,1]")
        if len(self.coords_true) != len(self.coords_pred):
            raise MetricsError(
                f"coordinate length mismatch: {len(self.coords_true)} != {len(self.coords_pred)}"
            )


def cls_loss(sample: LossSample) -> float:
    """Cross-entropy against the one-hot label: ``-sum(y_i * log(p_i))``."""
    total = 0.0
    for y_i, p_i in zip(sample.y, sample.p):
        if y_i == 0.0:
            continue
        if p_i == 0.0:
            raise InfiniteLossError("zero probability at the true class")
        total -= y_i * math.log(p_i)
    return total


def bbox_loss(sample: LossSample) -> float:
    """Squared error over box coordinates: ``sum((x_i - x̂_i)^2)``.

    Squares are formed by multiplication, which IEEE-754 rounds exactly,
    rather than ``**``, whose libm pow can be off by an ulp.
    """
    total = 0.0
    for a, b in zip(sample.coords_true, sample.coords_pred):
        diff = a - b
        total += diff * diff
    return total
