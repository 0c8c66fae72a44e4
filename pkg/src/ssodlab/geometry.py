"""Rotated-box geometry: canonical form, Gaussian view, distances, IoU.

A rotated box is ``(cx, cy, w, h, theta)`` in pixels, with ``theta`` in
radians measured for the w-edge.  Canonical form keeps the long edge as
``w`` and restricts ``theta`` to ``[-pi/2, pi/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import CovarianceError, InvalidBoxError, QuadFormatError

MIN_EXTENT = 1e-6
SMALL_AREA = 1024.0
_HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class RotatedBox:
    """Rotated rectangle with center (cx, cy), extents (w, h), angle theta."""

    cx: float
    cy: float
    w: float
    h: float
    theta: float

    def __post_init__(self) -> None:
        vals = (self.cx, self.cy, self.w, self.h, self.theta)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidBoxError(f"non-finite box parameters: {vals}")
        if self.w < MIN_EXTENT or self.h < MIN_EXTENT:
            raise InvalidBoxError(f"box extents below {MIN_EXTENT}: w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    def to_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h, self.theta], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class GaussianBox:
    """Gaussian view of a rotated box: mean 2-vector and 2x2 covariance."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=np.float64).reshape(2)
        sigma = np.asarray(self.sigma, dtype=np.float64).reshape(2, 2)
        scale = max(abs(sigma[0, 0]), abs(sigma[1, 1]), 1e-12)
        if abs(sigma[0, 1] - sigma[1, 0]) > 1e-9 * scale:
            raise CovarianceError(f"covariance is not symmetric: {sigma.tolist()}")
        sym = 0.5 * (sigma[0, 1] + sigma[1, 0])
        sigma = np.array([[sigma[0, 0], sym], [sym, sigma[1, 1]]], dtype=np.float64)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


def _wrap_half_pi(theta: float) -> float:
    """Wrap an angle into [-pi/2, pi/2) modulo pi."""
    out = math.fmod(theta + _HALF_PI, math.pi)
    if out < 0.0:
        out += math.pi
    return out - _HALF_PI


def canonicalize(box: RotatedBox) -> RotatedBox:
    """Canonical representative of a box under its rectangle symmetries.

    The long edge becomes ``w`` (swapping rotates theta by pi/2) and theta
    lands in ``[-pi/2, pi/2)``.  Squares are quarter-turn symmetric, so their
    angle is additionally reduced to ``[-pi/4, pi/4)``.
    """
    w, h, theta = box.w, box.h, box.theta
    if w < h:
        w, h = h, w
        theta = theta + _HALF_PI
    if not -_HALF_PI <= theta < _HALF_PI:
        theta = _wrap_half_pi(theta)
    quarter = math.pi / 4.0
    if w == h and not -quarter <= theta < quarter:
        theta = math.fmod(theta + quarter, _HALF_PI)
        if theta < 0.0:
            theta += _HALF_PI
        theta -= quarter
    return replace(box, w=w, h=h, theta=theta)


def is_small(box: RotatedBox, small_area: float = SMALL_AREA) -> bool:
    """True when the box area falls strictly below the small-object cutoff."""
    return box.area < small_area


def box_to_quad(box: RotatedBox) -> np.ndarray:
    """Corner coordinates as a (4, 2) array, counter-clockwise from (-w/2, -h/2)."""
    c = math.cos(box.theta)
    s = math.sin(box.theta)
    hw, hh = 0.5 * box.w, 0.5 * box.h
    offsets = np.array([(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)], dtype=np.float64)
    rot = np.array([[c, -s], [s, c]], dtype=np.float64)
    return offsets @ rot.T + np.array([box.cx, box.cy], dtype=np.float64)


def quad_to_box(quad: np.ndarray, tol: float = 0.01) -> RotatedBox:
    """Fit a rotated box to a 4-corner quad that is a rectangle up to ``tol``.

    Opposite edges (and the diagonals) may disagree in length by at most the
    relative tolerance; the fit uses edge midlines, so small float noise in
    the corners averages out.  Returns the canonical box.
    """
    pts = np.asarray(quad, dtype=np.float64).reshape(4, 2)
    if not np.all(np.isfinite(pts)):
        raise QuadFormatError(f"non-finite quad corners: {pts.tolist()}")
    edges = np.roll(pts, -1, axis=0) - pts
    lens = np.hypot(edges[:, 0], edges[:, 1])
    diags = np.array([
        math.hypot(*(pts[2] - pts[0])),
        math.hypot(*(pts[3] - pts[1])),
    ])

    def mismatch(u: float, v: float) -> float:
        m = max(u, v)
        return abs(u - v) / m if m > 0.0 else 0.0

    if mismatch(lens[0], lens[2]) > tol or mismatch(lens[1], lens[3]) > tol:
        raise QuadFormatError(f"opposite edge lengths differ beyond {tol:.0%}: {lens.tolist()}")
    if mismatch(diags[0], diags[1]) > tol:
        raise QuadFormatError(f"diagonals differ beyond {tol:.0%}: {diags.tolist()}")

    cx, cy = pts.mean(axis=0)
    w = 0.5 * (lens[0] + lens[2])
    h = 0.5 * (lens[1] + lens[3])
    direction = (pts[1] - pts[0]) + (pts[2] - pts[3])
    theta = math.atan2(direction[1], direction[0])
    if w < MIN_EXTENT or h < MIN_EXTENT:
        raise QuadFormatError(f"degenerate quad: w={w}, h={h}")
    return canonicalize(RotatedBox(float(cx), float(cy), float(w), float(h), theta))


def to_gaussian(box: RotatedBox) -> GaussianBox:
    """Gaussian form: mean at the center, covariance from the rotated extents."""
    w2 = box.w * box.w / 4.0
    h2 = box.h * box.h / 4.0
    c = math.cos(box.theta)
    s = math.sin(box.theta)
    s11 = w2 * c * c + h2 * s * s
    s22 = w2 * s * s + h2 * c * c
    s12 = (w2 - h2) * c * s
    return GaussianBox(
        mu=np.array([box.cx, box.cy], dtype=np.float64),
        sigma=np.array([[s11, s12], [s12, s22]], dtype=np.float64),
    )


def wasserstein_sq(a: GaussianBox, b: GaussianBox) -> float:
    """Squared 2-Wasserstein distance between two Gaussian boxes.

    Uses the closed form for 2x2 covariances: the coupling trace reduces to
    ``sqrt(tr(Sa Sb) + 2 sqrt(det Sa det Sb))``.
    """
    for g in (a, b):
        s = g.sigma
        det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
        scale = max(abs(s[0, 0]), abs(s[1, 1]), 1e-12)
        if s[0, 0] < -1e-12 * scale or s[1, 1] < -1e-12 * scale or det < -1e-9 * scale * scale:
            raise CovarianceError(f"covariance is not PSD: {s.tolist()}")
    sa, sb = a.sigma, b.sigma
    dmu = a.mu - b.mu
    deta = max(sa[0, 0] * sa[1, 1] - sa[0, 1] * sa[1, 0], 0.0)
    detb = max(sb[0, 0] * sb[1, 1] - sb[0, 1] * sb[1, 0], 0.0)
    cross = sa[0, 0] * sb[0, 0] + 2.0 * sa[0, 1] * sb[0, 1] + sa[1, 1] * sb[1, 1]
    inner = max(cross + 2.0 * math.sqrt(deta * detb), 0.0)
    term = sa[0, 0] + sa[1, 1] + sb[0, 0] + sb[1, 1] - 2.0 * math.sqrt(inner)
    return float(dmu @ dmu + max(term, 0.0))


def rotated_iou(a: RotatedBox, b: RotatedBox) -> float:
    """Intersection-over-union of two rotated boxes, in [0, 1]."""
    return float(kernels.rotated_iou_pair(a.to_array(), b.to_array()))


def boxes_to_array(boxes: Iterable[RotatedBox] | Sequence[RotatedBox]) -> np.ndarray:
    """Stack boxes into an (N, 5) float64 parameter array."""
    rows = [(b.cx, b.cy, b.w, b.h, b.theta) for b in boxes]
    if not rows:
        return np.zeros((0, 5), dtype=np.float64)
    return np.array(rows, dtype=np.float64)
