# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels; mirrors the public functions of ``_fallback``."""

from libc.math cimport cos, sin, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "compiled"


cdef inline double _dmax(double a, double b) nogil:
    return a if a > b else b


def wd_sq_matrix(object a_in, object b_in):
    """Squared 2-Wasserstein distance between the Gaussian forms of two box sets."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, m), dtype=np.float64)

    cdef cnp.ndarray[cnp.float64_t, ndim=1] a11 = np.empty(n), a12 = np.empty(n), a22 = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] atr = np.empty(n), adet = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b11 = np.empty(m), b12 = np.empty(m), b22 = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] btr = np.empty(m), bdet = np.empty(m)

    cdef Py_ssize_t i, j
    cdef double w2, h2, c, s, cross, inner, term, dx, dy

    for i in range(n):
        w2 = a[i, 2] * a[i, 2] / 4.0
        h2 = a[i, 3] * a[i, 3] / 4.0
        c = cos(a[i, 4])
        s = sin(a[i, 4])
        a11[i] = w2 * c * c + h2 * s * s
        a22[i] = w2 * s * s + h2 * c * c
        a12[i] = (w2 - h2) * c * s
        atr[i] = w2 + h2
        adet[i] = w2 * h2
    for j in range(m):
        w2 = b[j, 2] * b[j, 2] / 4.0
        h2 = b[j, 3] * b[j, 3] / 4.0
        c = cos(b[j, 4])
        s = sin(b[j, 4])
        b11[j] = w2 * c * c + h2 * s * s
        b22[j] = w2 * s * s + h2 * c * c
        b12[j] = (w2 - h2) * c * s
        btr[j] = w2 + h2
        bdet[j] = w2 * h2

    for i in range(n):
        for j in range(m):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            cross = a11[i] * b11[j] + 2.0 * a12[i] * b12[j] + a22[i] * b22[j]
            inner = cross + 2.0 * sqrt(_dmax(adet[i] * bdet[j], 0.0))
            term = atr[i] + btr[j] - 2.0 * sqrt(_dmax(inner, 0.0))
            out[i, j] = dx * dx + dy * dy + _dmax(term, 0.0)
    return out


cdef inline void _fill_corners(double cx, double cy, double w, double h, double theta,
                               double* xs, double* ys) nogil:
    cdef double c = cos(theta)
    cdef double s = sin(theta)
    cdef double hw = 0.5 * w
    cdef double hh = 0.5 * h
    xs[0] = cx + c * (-hw) - s * (-hh); ys[0] = cy + s * (-hw) + c * (-hh)
    xs[1] = cx + c * hw - s * (-hh);    ys[1] = cy + s * hw + c * (-hh)
    xs[2] = cx + c * hw - s * hh;       ys[2] = cy + s * hw + c * hh
    xs[3] = cx + c * (-hw) - s * hh;    ys[3] = cy + s * (-hw) + c * hh


cdef double _iou_scalar(double acx, double acy, double aw, double ah, double at,
                        double bcx, double bcy, double bw, double bh, double bt) nogil:
    cdef double dx = acx - bcx
    cdef double dy = acy - bcy
    cdef double reach = 0.5 * (sqrt(aw * aw + ah * ah) + sqrt(bw * bw + bh * bh))
    if dx * dx + dy * dy > reach * reach:
        return 0.0

    cdef double sx[16]
    cdef double sy[16]
    cdef double tx[16]
    cdef double ty[16]
    cdef double qx[4]
    cdef double qy[4]
    cdef int ns, nt, i, k, e
    cdef double ax, ay, bx, by, ex, ey, dprev, dcur, t, px, py, cxx, cyy
    cdef double inter, union_, acc, iou

    _fill_corners(acx, acy, aw, ah, at, sx, sy)
    _fill_corners(bcx, bcy, bw, bh, bt, qx, qy)
    ns = 4

    for e in range(4):
        ax = qx[e]; ay = qy[e]
        bx = qx[(e + 1) % 4]; by = qy[(e + 1) % 4]
        ex = bx - ax
        ey = by - ay
        nt = 0
        if ns == 0:
            break
        px = sx[ns - 1]; py = sy[ns - 1]
        dprev = ex * (py - ay) - ey * (px - ax)
        for i in range(ns):
            cxx = sx[i]; cyy = sy[i]
            dcur = ex * (cyy - ay) - ey * (cxx - ax)
            if dcur >= 0.0:
                if dprev < 0.0:
                    t = dprev / (dprev - dcur)
                    tx[nt] = px + t * (cxx - px); ty[nt] = py + t * (cyy - py); nt += 1
                tx[nt] = cxx; ty[nt] = cyy; nt += 1
            elif dprev >= 0.0:
                t = dprev / (dprev - dcur)
                tx[nt] = px + t * (cxx - px); ty[nt] = py + t * (cyy - py); nt += 1
            px = cxx; py = cyy; dprev = dcur
        ns = nt
        for k in range(ns):
            sx[k] = tx[k]; sy[k] = ty[k]

    if ns < 3:
        return 0.0
    acc = 0.0
    for i in range(ns):
        k = (i + 1) % ns
        acc += sx[i] * sy[k] - sx[k] * sy[i]
    inter = 0.5 * (acc if acc >= 0.0 else -acc)
    union_ = aw * ah + bw * bh - inter
    if union_ <= 0.0:
        return 0.0
    iou = inter / union_
    if iou < 0.0:
        return 0.0
    return 1.0 if iou > 1.0 else iou


def rotated_iou_pair(object a_in, object b_in):
    """Intersection-over-union of two rotated boxes given as 5-vectors."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    return _iou_scalar(a[0], a[1], a[2], a[3], a[4], b[0], b[1], b[2], b[3], b[4])


def rotated_iou_matrix(object a_in, object b_in):
    """Pairwise IoU matrix between two rotated box sets, shape (len(a), len(b))."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, m), dtype=np.float64)
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(m):
            out[i, j] = _iou_scalar(a[i, 0], a[i, 1], a[i, 2], a[i, 3], a[i, 4],
                                    b[j, 0], b[j, 1], b[j, 2], b[j, 3], b[j, 4])
    return out
