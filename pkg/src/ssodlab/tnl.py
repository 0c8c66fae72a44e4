"""Teacher-guided selection and weighting of negative training samples.

The teacher's background scores identify proposals that are safe to treat
as negatives: a proposal sitting on a real but undetected object tends to
get a low background score, so requiring a high one suppresses false
negatives.  Separately, the teacher's own uncertain detections make good
hard negatives, weighted up the more confidently wrong they are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .geometry import boxes_to_array
from .types import Detection


@dataclass(frozen=True)
class HardNegative:
    """A low-confidence teacher prediction kept as a weighted negative."""

    index: int
    score: float
    weight: float


@dataclass(frozen=True)
class NegativeSelection:
    """Outcome of negative selection for one scene.

    ``kept_normal`` holds indices into the proposal list; ``hard`` holds
    entries indexed into the teacher prediction list.  A proposal that
    spatially duplicates a hard prediction is dropped from the normal set.
    """

    kept_normal: tuple[int, ...]
    hard: tuple[HardNegative, ...]
    bg_threshold: float
    hard_score_max: float


def _check_unit_scores(scores: Sequence[float], what: str) -> None:
    for s in scores:
        if not (math.isfinite(s) and 0.0 <= s <= 1.0):
            raise ValueError(f"{what} must lie in [0, 1], got {s}")


def filter_negatives(bg_scores: Sequence[float], bg_threshold: float = 0.7) -> list[int]:
    """Indices of proposals whose background score strictly exceeds the threshold."""
    _check_unit_scores(bg_scores, "background scores")
    return [i for i, s in enumerate(bg_scores) if s > bg_threshold]


def hard_negative_weight(score: float) -> float:
    """Weight for a hard negative with foreground score ``s``: ``2 * (1 - s^2)``."""
    return 2.0 * (1.0 - score * score)


def mine_hard_negatives(preds: Sequence[Detection], score_max: float = 0.5) -> list[HardNegative]:
    """Teacher predictions scoring strictly below ``score_max``, weighted.

    Output is sorted by weight descending (lowest score first), index
    ascending on ties.  Weights fall in (1.5, 2.0] for the default cutoff.
    """
    _check_unit_scores([d.score for d in preds], "prediction scores")
    picked = [
        HardNegative(index=i, score=d.score, weight=hard_negative_weight(d.score))
        for i, d in enumerate(preds)
        if d.score < score_max
    ]
    picked.sort(key=lambda h: (-h.weight, h.index))
    return picked


def negative_loss(normal_losses: Sequence[float],
                  hard_losses: Sequence[tuple[float, float]]) -> float:
    """Total negative loss: weighted hard terms plus plain normal terms.

    ``hard_losses`` holds (loss_value, prediction_score) pairs; each hard
    term is scaled by ``2 * (1 - score^2)``.
    """
    total = 0.0
    for value, score in hard_losses:
        total += hard_negative_weight(score) * value
    for value in normal_losses:
        total += value
    return total


def select_negatives(proposal_boxes, bg_scores: Sequence[float],
                     teacher_preds: Sequence[Detection],
                     bg_threshold: float = 0.7,
                     hard_score_max: float = 0.5,
                     max_hard: int | None = None,
                     dedup_iou: float = 0.5) -> NegativeSelection:
    """Combine background filtering with hard-negative mining for one scene.

    Normal negatives come from proposals via ``filter_negatives``; hard
    negatives from teacher predictions via ``mine_hard_negatives`` (capped
    at ``max_hard`` when given).  A kept proposal overlapping a kept hard
    prediction at IoU >= ``dedup_iou`` is dropped so the same region is not
    counted twice; the hard entry wins.
    """
    kept = filter_negatives(bg_scores, bg_threshold)
    hard = mine_hard_negatives(teacher_preds, hard_score_max)
    if max_hard is not None:
        hard = hard[:max_hard]
    if kept and hard:
        prop_arr = (proposal_boxes if isinstance(proposal_boxes, np.ndarray)
                    else boxes_to_array(proposal_boxes))
        hard_arr = boxes_to_array([teacher_preds[h.index].box for h in hard])
        overlap = kernels.rotated_iou_matrix(prop_arr[kept], hard_arr)
        keep_mask = ~(overlap >= dedup_iou).any(axis=1)
        kept = [idx for idx, keep in zip(kept, keep_mask) if keep]
    return NegativeSelection(
        kept_normal=tuple(kept),
        hard=tuple(hard),
        bg_threshold=bg_threshold,
        hard_score_max=hard_score_max,
    )
