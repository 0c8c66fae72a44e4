"""Detection evaluation: greedy matching, average precision, size-split reports."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .geometry import boxes_to_array, is_small
from .types import Detection


@dataclass(frozen=True)
class MatchResult:
    """Greedy match of predictions against ground truth for one image.

    Arrays are aligned with ``order`` (prediction indices, score-descending).
    Predictions whose best hit is a difficult ground truth are flagged
    ``ignored`` and count as neither true nor false positives.
    """

    order: np.ndarray
    tp: np.ndarray
    ignored: np.ndarray
    matched_gt: np.ndarray
    n_gt: int


def match_detections(
    preds: Sequence[Detection],
    gts: Sequence[Detection],
    iou_threshold: float = 0.5,
    difficult: Sequence[bool] | None = None,
) -> MatchResult:
    """Match score-descending predictions to ground truth greedily.

    Each prediction claims the unmatched plain ground truth with the
    highest overlap at or above the threshold (ties go to the lower
    ground-truth index).  Failing that, overlap with any difficult
    ground truth marks the prediction ignored; otherwise it is a false
    positive.  Equal scores keep input order.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou threshold must be in (0, 1]: {iou_threshold}")
    n_pred, n_gt_all = len(preds), len(gts)
    if difficult is None:
        difficult = [False] * n_gt_all
    if len(difficult) != n_gt_all:
        raise ValueError("difficult flags must align with ground truths")
    diff = np.asarray(difficult, dtype=bool)

    scores = np.array([p.score for p in preds], dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    tp = np.zeros(n_pred, dtype=bool)
    ignored = np.zeros(n_pred, dtype=bool)
    matched_gt = np.full(n_pred, -1, dtype=np.int64)
    n_gt = int(n_gt_all - diff.sum())
    if n_pred == 0 or n_gt_all == 0:
        return MatchResult(order=order, tp=tp, ignored=ignored,
                           matched_gt=matched_gt, n_gt=n_gt)

    iou = kernels.rotated_iou_matrix(
        boxes_to_array([p.box for p in preds]),
        boxes_to_array([g.box for g in gts]),
    )
    taken = np.zeros(n_gt_all, dtype=bool)
    for rank, pi in enumerate(order):
        row = iou[pi]
        best_j, best_iou = -1, -1.0
        for j in range(n_gt_all):
            if taken[j] or diff[j]:
                continue
            if row[j] >= iou_threshold and row[j] > best_iou:
                best_j, best_iou = j, row[j]
        if best_j >= 0:
            taken[best_j] = True
            tp[rank] = True
            matched_gt[rank] = best_j
        elif diff.any() and (row[diff] >= iou_threshold).any():
            ignored[rank] = True
    return MatchResult(order=order, tp=tp, ignored=ignored,
                       matched_gt=matched_gt, n_gt=n_gt)


def average_precision(scores: np.ndarray, tp_flags: np.ndarray, n_gt: int) -> float:
    """Area under the interpolated precision envelope over all recall points.

    ``scores`` must already be sorted descending and aligned with
    ``tp_flags``; ignored predictions must be dropped beforehand.
    """
    scores = np.asarray(scores, dtype=np.float64)
    tp = np.asarray(tp_flags, dtype=bool)
    if scores.shape != tp.shape or scores.ndim != 1:
        raise ValueError("scores and tp flags must be aligned 1-d arrays")
    if n_gt <= 0:
        raise ValueError(f"n_gt must be positive: {n_gt}")
    if scores.size and np.any(np.diff(scores) > 0):
        raise ValueError("scores must be sorted descending")
    if scores.size == 0:
        return 0.0
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(~tp)
    recall = tp_cum / n_gt
    precision = tp_cum / (tp_cum + fp_cum)
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    moved = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[moved + 1] - mrec[moved]) * mpre[moved + 1]))


@dataclass(frozen=True)
class EvalReport:
    """Aggregate detection quality over a set of images."""

    ap: dict[str, float | None]
    mean_ap: float | None
    precision: float | None
    recall: float | None
    false_alarm: float
    small_recall: float | None
    large_recall: float | None
    small_precision: float | None
    large_precision: float | None
    n_gt: int
    n_pred: int
    tp: int
    fp: int

    def to_dict(self) -> dict:
        return {
            "ap": dict(self.ap),
            "mean_ap": self.mean_ap,
            "precision": self.precision,
            "recall": self.recall,
            "false_alarm": self.false_alarm,
            "small_recall": self.small_recall,
            "large_recall": self.large_recall,
            "small_precision": self.small_precision,
            "large_precision": self.large_precision,
            "n_gt": self.n_gt,
            "n_pred": self.n_pred,
            "tp": self.tp,
            "fp": self.fp,
        }


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def evaluate(
    preds_by_image: dict[str, Sequence[Detection]],
    gts_by_image: dict[str, Sequence[Detection]],
    iou_threshold: float = 0.5,
    difficult_by_image: dict[str, Sequence[bool]] | None = None,
) -> EvalReport:
    """Class-wise AP with size-stratified precision/recall.

    Classes are matched independently; the mean AP covers classes with at
    least one plain (non-difficult) ground truth.  A true positive counts
    toward the size group of its matched ground truth, a false positive
    toward the size group of its own box.  ``false_alarm`` is the false
    positives' share of all counted predictions, zero when there are none.
    """
    difficult_by_image = difficult_by_image or {}
    image_ids = sorted(set(preds_by_image) | set(gts_by_image))
    classes = sorted(
        {g.category for gts in gts_by_image.values() for g in gts}
        | {p.category for preds in preds_by_image.values() for p in preds}
    )

    per_class: dict[str, dict[str, list]] = {
        c: {"scores": [], "tp": [], "n_gt": 0} for c in classes}
    tp_small = tp_large = fp_small = fp_large = 0
    matched_small = matched_large = gt_small = gt_large = 0

    for image_id in image_ids:
        preds = list(preds_by_image.get(image_id, []))
        gts = list(gts_by_image.get(image_id, []))
        diff = list(difficult_by_image.get(image_id, [False] * len(gts)))
        if len(diff) != len(gts):
            raise ValueError(f"difficult flags mismatch for image {image_id!r}")
        for j, gt in enumerate(gts):
            if diff[j]:
                continue
            if is_small(gt.box):
                gt_small += 1
            else:
                gt_large += 1
        for cls in classes:
            pi = [i for i, p in enumerate(preds) if p.category == cls]
            gi = [j for j, g in enumerate(gts) if g.category == cls]
            cls_preds = [preds[i] for i in pi]
            cls_gts = [gts[j] for j in gi]
            cls_diff = [diff[j] for j in gi]
            result = match_detections(cls_preds, cls_gts, iou_threshold, cls_diff)
            per_class[cls]["n_gt"] += result.n_gt
            for rank, local in enumerate(result.order):
                if result.ignored[rank]:
                    continue
                pred = cls_preds[local]
                per_class[cls]["scores"].append(pred.score)
                per_class[cls]["tp"].append(bool(result.tp[rank]))
                if result.tp[rank]:
                    gt_box = cls_gts[result.matched_gt[rank]].box
                    if is_small(gt_box):
                        tp_small += 1
                        matched_small += 1
                    else:
                        tp_large += 1
                        matched_large += 1
                elif is_small(pred.box):
                    fp_small += 1
                else:
                    fp_large += 1

    ap: dict[str, float | None] = {}
    for cls in classes:
        bucket = per_class[cls]
        if bucket["n_gt"] == 0:
            ap[cls] = None
            continue
        scores = np.asarray(bucket["scores"], dtype=np.float64)
        tp_flags = np.asarray(bucket["tp"], dtype=bool)
        order = np.argsort(-scores, kind="stable")
        ap[cls] = average_precision(scores[order], tp_flags[order], bucket["n_gt"])

    scored = [v for v in ap.values() if v is not None]
    tp_total = tp_small + tp_large
    fp_total = fp_small + fp_large
    counted = tp_total + fp_total
    return EvalReport(
        ap=ap,
        mean_ap=float(np.mean(scored)) if scored else None,
        precision=_ratio(tp_total, counted),
        recall=_ratio(tp_total, gt_small + gt_large),
        false_alarm=fp_total / counted if counted else 0.0,
        small_recall=_ratio(matched_small, gt_small),
        large_recall=_ratio(matched_large, gt_large),
        small_precision=_ratio(tp_small, tp_small + fp_small),
        large_precision=_ratio(tp_large, tp_large + fp_large),
        n_gt=gt_small + gt_large,
        n_pred=counted,
        tp=tp_total,
        fp=fp_total,
    )


def pseudo_label_quality(
    preds_by_image: dict[str, Sequence[Detection]],
    gts_by_image: dict[str, Sequence[Detection]],
    iou_threshold: float = 0.5,
) -> dict[str, dict[str, float | int | None]]:
    """Precision/recall of a pseudo-label set, split by object size.

    Ratios are None when a group has nothing to measure.
    """
    report = evaluate(preds_by_image, gts_by_image, iou_threshold)
    counts = {"small": {"n_pseudo": 0, "n_gt": 0}, "large": {"n_pseudo": 0, "n_gt": 0}}
    for preds in preds_by_image.values():
        for p in preds:
            counts["small" if is_small(p.box) else "large"]["n_pseudo"] += 1
    for gts in gts_by_image.values():
        for g in gts:
            counts["small" if is_small(g.box) else "large"]["n_gt"] += 1
    return {
        "small": {
            "precision": report.small_precision,
            "recall": report.small_recall,
            "n_pseudo": counts["small"]["n_pseudo"],
            "n_gt": counts["small"]["n_gt"],
        },
        "large": {
            "precision": report.large_precision,
            "recall": report.large_recall,
            "n_pseudo": counts["large"]["n_pseudo"],
            "n_gt": counts["large"]["n_gt"],
        },
    }
