"""Similarity-based label assignment with size-balanced loss reweighting.

Anchors are assigned to pseudo-boxes by ranking the squared 2-Wasserstein
distance between their Gaussian forms.  Unlike IoU thresholding, the
distance stays informative when boxes barely overlap, so tiny objects far
from any anchor shape still collect their top-ranked anchors.  Squared
distances are used throughout; ranking is unaffected by the square root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .geometry import RotatedBox, boxes_to_array


@dataclass(frozen=True)
class AnchorSet:
    """Axis-aligned anchor grid flattened to an (N, 5) parameter array."""

    boxes: np.ndarray
    image_size: tuple[int, int]
    strides: tuple[int, ...]
    scale: float
    ratios: tuple[float, ...]

    def __len__(self) -> int:
        return int(self.boxes.shape[0])


@dataclass(frozen=True)
class LossSample:
    """One positive-sample loss value tagged with its target's size group."""

    value: float
    is_small: bool

    def __post_init__(self) -> None:
        if not (math.isfinite(self.value) and self.value >= 0.0):
            raise ValueError(f"loss value must be finite and non-negative: {self.value}")


@dataclass(frozen=True)
class AssignmentResult:
    """Anchor labels (-1 background, else pseudo-box index) plus summaries.

    ``positives`` lists each pseudo-box's anchors in rank order after
    conflict resolution; ``best_similarity`` holds the per-pseudo-box best
    raw value (minimum squared distance, or maximum IoU for the baseline).
    """

    anchor_labels: np.ndarray
    positives: tuple[tuple[int, ...], ...]
    best_similarity: np.ndarray
    method: str


def gen_anchor_grid(image_size: tuple[int, int],
                    strides: Sequence[int] = (8, 16, 32, 64, 128),
                    scale: float = 8.0,
                    ratios: Sequence[float] = (0.5, 1.0, 2.0)) -> AnchorSet:
    """Multi-level axis-aligned anchor grid.

    Each stride level places one cell per ``stride`` pixels with centers at
    cell midpoints; every cell carries one anchor per aspect ratio with area
    ``(scale * stride)^2`` and height/width ratio ``r``.  Rows are ordered
    level, then row, then column, then ratio.
    """
    width, height = image_size
    if width <= 0 or height <= 0:
        raise ValueError(f"image size must be positive: {image_size}")
    if scale <= 0.0:
        raise ValueError(f"anchor scale must be positive: {scale}")
    if any(s <= 0 for s in strides):
        raise ValueError(f"strides must be positive: {strides}")
    blocks = []
    for stride in strides:
        nx = math.ceil(width / stride)
        ny = math.ceil(height / stride)
        xs = (np.arange(nx, dtype=np.float64) + 0.5) * stride
        ys = (np.arange(ny, dtype=np.float64) + 0.5) * stride
        grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
        centers = np.column_stack([grid_x.ravel(), grid_y.ravel()])
        base = scale * stride
        for cx, cy in centers:
            for ratio in ratios:
                root = math.sqrt(ratio)
                blocks.append((cx, cy, base / root, base * root, 0.0))
    return AnchorSet(
        boxes=np.array(blocks, dtype=np.float64).reshape(-1, 5),
        image_size=(int(width), int(height)),
        strides=tuple(int(s) for s in strides),
        scale=float(scale),
        ratios=tuple(float(r) for r in ratios),
    )


def wd_similarity_matrix(pseudo_boxes: Sequence[RotatedBox] | np.ndarray,
                         anchors: AnchorSet) -> np.ndarray:
    """Squared Wasserstein distances, one row per pseudo-box, one column per anchor."""
    arr = pseudo_boxes if isinstance(pseudo_boxes, np.ndarray) else boxes_to_array(pseudo_boxes)
    return kernels.wd_sq_matrix(arr, anchors.boxes)


def topk_assign(matrix: np.ndarray, k: int = 2) -> AssignmentResult:
    """Mark each pseudo-box's k nearest anchors positive, resolving conflicts.

    Distance ties rank the lower anchor index first.  An anchor wanted by
    several pseudo-boxes goes to the one at smaller distance (then lower
    pseudo-box index); the losers keep only their remaining picks, with no
    replacement candidates added.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    matrix = np.asarray(matrix, dtype=np.float64)
    n_pseudo, n_anchors = matrix.shape
    anchor_labels = np.full(n_anchors, -1, dtype=np.int64)
    if n_pseudo == 0 or n_anchors == 0:
        empty = tuple(() for _ in range(n_pseudo))
        return AssignmentResult(anchor_labels, empty,
                                np.full(n_pseudo, np.inf), "wd_topk")
    ranked = np.argsort(matrix, axis=1, kind="stable")[:, :k]
    winner: dict[int, tuple[float, int]] = {}
    for i in range(n_pseudo):
        for a in ranked[i]:
            a = int(a)
            claim = (float(matrix[i, a]), i)
            if a not in winner or claim < winner[a]:
                winner[a] = claim
    for a, (_, i) in winner.items():
        anchor_labels[a] = i
    positives = tuple(
        tuple(int(a) for a in ranked[i] if anchor_labels[a] == i)
        for i in range(n_pseudo)
    )
    return AssignmentResult(anchor_labels, positives, matrix.min(axis=1), "wd_topk")


def baseline_iou_assign(pseudo_boxes: Sequence[RotatedBox] | np.ndarray,
                        anchors: AnchorSet,
                        iou_threshold: float = 0.5) -> AssignmentResult:
    """Conventional assignment: anchors overlapping a pseudo-box at or above
    the IoU threshold become positive for their best-overlap pseudo-box."""
    arr = pseudo_boxes if isinstance(pseudo_boxes, np.ndarray) else boxes_to_array(pseudo_boxes)
    n_pseudo = arr.shape[0]
    n_anchors = len(anchors)
    anchor_labels = np.full(n_anchors, -1, dtype=np.int64)
    if n_pseudo == 0 or n_anchors == 0:
        empty = tuple(() for _ in range(n_pseudo))
        return AssignmentResult(anchor_labels, empty,
                                np.zeros(n_pseudo), "iou_threshold")
    iou = kernels.rotated_iou_matrix(arr, anchors.boxes)
    best = iou.argmax(axis=0)
    best_iou = iou[best, np.arange(n_anchors)]
    positive = best_iou >= iou_threshold
    anchor_labels[positive] = best[positive]
    positives = tuple(
        tuple(int(a) for a in np.nonzero(anchor_labels == i)[0])
        for i in range(n_pseudo)
    )
    return AssignmentResult(anchor_labels, positives, iou.max(axis=1), "iou_threshold")


def positive_loss_reweight(samples: Sequence[LossSample]) -> tuple[float, np.ndarray]:
    """Size-balanced weighted sum of positive-sample losses.

    With both groups present, a sample's weight is ``n_total / (2 * n_group)``
    so each size group contributes exactly half of the total weight.  If
    either group is empty the weights stay 1.
    """
    n = len(samples)
    if n == 0:
        return 0.0, np.zeros(0, dtype=np.float64)
    n_small = sum(1 for s in samples if s.is_small)
    n_large = n - n_small
    if n_small == 0 or n_large == 0:
        weights = np.ones(n, dtype=np.float64)
    else:
        w_small = n / (2.0 * n_small)
        w_large = n / (2.0 * n_large)
        weights = np.array([w_small if s.is_small else w_large for s in samples])
    values = np.array([s.value for s in samples], dtype=np.float64)
    return float(weights @ values), weights
