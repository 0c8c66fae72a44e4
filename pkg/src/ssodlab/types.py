"""Shared lightweight record types."""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import RotatedBox


@dataclass(frozen=True)
class Detection:
    """One detection: a rotated box with a category and a confidence score.

    Used for teacher predictions, pseudo-labels, and ground truth alike
    (ground truth carries score 1.0).  ``bg_score`` is the background
    confidence the teacher assigns to the same region, when available.
    """

    box: RotatedBox
    category: str
    score: float
    bg_score: float | None = None
