"""Pure NumPy/Python implementations of the performance-critical kernels.

Kernels operate on float64 arrays of box parameters with one row per box:
``(cx, cy, w, h, theta)``.  The compiled extension in ``_core.pyx`` mirrors
this module's public functions exactly.
"""

from __future__ import annotations

import math

import numpy as np

NAME = "python"


def _gaussian_terms(boxes: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-box covariance entries (s11, s12, s22), trace, and determinant."""
    w2 = boxes[:, 2] ** 2 / 4.0
    h2 = boxes[:, 3] ** 2 / 4.0
    c = np.cos(boxes[:, 4])
    s = np.sin(boxes[:, 4])
    s11 = w2 * c * c + h2 * s * s
    s22 = w2 * s * s + h2 * c * c
    s12 = (w2 - h2) * c * s
    # rotation preserves the determinant, so use the exact product form
    det = w2 * h2
    return s11, s12, s22, s11 + s22, det


def wd_sq_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared 2-Wasserstein distance between the Gaussian forms of two box sets.

    Returns an (len(a), len(b)) float64 matrix.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a11, a12, a22, tra, deta = _gaussian_terms(a)
    b11, b12, b22, trb, detb = _gaussian_terms(b)

    dx = a[:, 0][:, None] - b[:, 0][None, :]
    dy = a[:, 1][:, None] - b[:, 1][None, :]

    cross = (
        a11[:, None] * b11[None, :]
        + 2.0 * a12[:, None] * b12[None, :]
        + a22[:, None] * b22[None, :]
    )
    inner = cross + 2.0 * np.sqrt(np.maximum(deta[:, None] * detb[None, :], 0.0))
    trace_term = tra[:, None] + trb[None, :] - 2.0 * np.sqrt(np.maximum(inner, 0.0))
    return dx * dx + dy * dy + np.maximum(trace_term, 0.0)


def _corners(cx: float, cy: float, w: float, h: float, theta: float) -> list[tuple[float, float]]:
    """Corner coordinates in counter-clockwise order (math orientation)."""
    c = math.cos(theta)
    s = math.sin(theta)
    hw = 0.5 * w
    hh = 0.5 * h
    out = []
    for ox, oy in ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)):
        out.append((cx + c * ox - s * oy, cy + s * ox + c * oy))
    return out


def _polygon_area(poly: list[tuple[float, float]]) -> float:
    n = len(poly)
    acc = 0.0
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return 0.5 * abs(acc)


def _clip_polygon(subject: list[tuple[float, float]], clip: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of ``subject`` against convex ``clip`` (CCW)."""
    out = subject
    n = len(clip)
    for i in range(n):
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex = bx - ax
        ey = by - ay
        inp = out
        out = []
        if not inp:
            break
        px, py = inp[-1]
        dprev = ex * (py - ay) - ey * (px - ax)
        for cx, cy in inp:
            dcur = ex * (cy - ay) - ey * (cx - ax)
            if dcur >= 0.0:
                if dprev < 0.0:
                    t = dprev / (dprev - dcur)
                    out.append((px + t * (cx - px), py + t * (cy - py)))
                out.append((cx, cy))
            elif dprev >= 0.0:
                t = dprev / (dprev - dcur)
                out.append((px + t * (cx - px), py + t * (cy - py)))
            px, py, dprev = cx, cy, dcur
    return out


def _iou_scalar(a: tuple[float, float, float, float, float], b: tuple[float, float, float, float, float]) -> float:
    acx, acy, aw, ah, at = a
    bcx, bcy, bw, bh, bt = b
    # circumscribed-circle quick reject
    dx = acx - bcx
    dy = acy - bcy
    reach = 0.5 * (math.hypot(aw, ah) + math.hypot(bw, bh))
    if dx * dx + dy * dy > reach * reach:
        return 0.0
    pa = _corners(acx, acy, aw, ah, at)
    pb = _corners(bcx, bcy, bw, bh, bt)
    inter_poly = _clip_polygon(pa, pb)
    if len(inter_poly) < 3:
        return 0.0
    inter = _polygon_area(inter_poly)
    union = aw * ah + bw * bh - inter
    if union <= 0.0:
        return 0.0
    iou = inter / union
    if iou < 0.0:
        return 0.0
    return 1.0 if iou > 1.0 else iou


def rotated_iou_pair(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection-over-union of two rotated boxes given as 5-vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return _iou_scalar(tuple(a.tolist()), tuple(b.tolist()))


def rotated_iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU matrix between two rotated box sets, shape (len(a), len(b))."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = np.zeros((a.shape[0], b.shape[0]), dtype=np.float64)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return out
    # vectorized circumscribed-circle quick reject keeps the Python loop short
    ra = 0.5 * np.hypot(a[:, 2], a[:, 3])
    rb = 0.5 * np.hypot(b[:, 2], b[:, 3])
    dx = a[:, 0][:, None] - b[:, 0][None, :]
    dy = a[:, 1][:, None] - b[:, 1][None, :]
    near = dx * dx + dy * dy <= (ra[:, None] + rb[None, :]) ** 2
    a_rows = [tuple(row) for row in a.tolist()]
    b_rows = [tuple(row) for row in b.tolist()]
    for i, j in zip(*np.nonzero(near)):
        out[i, j] = _iou_scalar(a_rows[i], b_rows[j])
    return out
