"""Size-aware adaptive thresholding of teacher predictions.

Candidates above a fixed confidence floor are split into small and large
groups by box area, and each group keeps only the scores at or above its
own percentile threshold.  Scoring well is easier for large objects, so a
single global cutoff starves the small group; per-group percentiles keep
the retained fraction comparable across sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyGroupError
from .geometry import SMALL_AREA, is_small
from .types import Detection


@dataclass(frozen=True)
class SatThresholds:
    """Per-group thresholds and bookkeeping from one selection round."""

    small_threshold: float
    large_threshold: float
    percentile: float
    floor: float
    n_small_candidates: int
    n_large_candidates: int
    n_small_kept: int
    n_large_kept: int


def collect_candidates(preds: Sequence[Detection], floor: float = 0.5) -> list[Detection]:
    """Predictions scoring strictly above the floor, in input order."""
    return [d for d in preds if d.score > floor]


def percentile_threshold(scores: Sequence[float], percentile: float) -> float:
    """Nearest-rank percentile of a score list.

    Scores are sorted ascending and the value at rank ``ceil(p/100 * n)``
    (1-based) is returned; percentile 0 maps to the minimum.
    """
    if not 0.0 <= percentile <= 100.0:
        raise ValueError(f"percentile must be in [0, 100], got {percentile}")
    n = len(scores)
    if n == 0:
        raise EmptyGroupError("percentile of an empty score list")
    # the tiny slack keeps exact multiples like 0.4 * 5 from rounding up
    rank = math.ceil(percentile * n / 100.0 - 1e-9)
    rank = min(max(rank, 1), n)
    return sorted(scores)[rank - 1]


def apply_thresholds(preds: Sequence[Detection], thresholds: SatThresholds,
                     small_area: float = SMALL_AREA) -> list[Detection]:
    """Filter predictions with already-computed group thresholds, keeping order.

    A prediction is kept when it clears the floor strictly and its own size
    group's threshold inclusively.
    """
    out = []
    for d in preds:
        if d.score <= thresholds.floor:
            continue
        cut = thresholds.small_threshold if is_small(d.box, small_area) else thresholds.large_threshold
        if d.score >= cut:
            out.append(d)
    return out


def select_pseudo_labels(preds: Sequence[Detection], percentile: float = 35.0,
                         floor: float = 0.5, small_area: float = SMALL_AREA,
                         ) -> tuple[list[Detection], SatThresholds]:
    """Select pseudo-labels with per-size-group percentile thresholds.

    Returns the kept detections sorted by score descending (stable) and the
    thresholds used.  An empty candidate group falls back to the floor and
    keeps nothing.
    """
    candidates = collect_candidates(preds, floor)
    small = [d.score for d in candidates if is_small(d.box, small_area)]
    large = [d.score for d in candidates if not is_small(d.box, small_area)]
    t_small = percentile_threshold(small, percentile) if small else floor
    t_large = percentile_threshold(large, percentile) if large else floor
    thresholds = SatThresholds(
        small_threshold=t_small,
        large_threshold=t_large,
        percentile=percentile,
        floor=floor,
        n_small_candidates=len(small),
        n_large_candidates=len(large),
        n_small_kept=0,
        n_large_kept=0,
    )
    kept = apply_thresholds(candidates, thresholds, small_area)
    n_small_kept = sum(1 for d in kept if is_small(d.box, small_area))
    thresholds = SatThresholds(
        small_threshold=t_small,
        large_threshold=t_large,
        percentile=percentile,
        floor=floor,
        n_small_candidates=len(small),
        n_large_candidates=len(large),
        n_small_kept=n_small_kept,
        n_large_kept=len(kept) - n_small_kept,
    )
    ordered = sorted(kept, key=lambda d: -d.score)
    return ordered, thresholds
