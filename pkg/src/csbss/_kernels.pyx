# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``.

Signatures and results match the numpy fallback to rounding.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sqrt, fabs

cnp.import_array()

cdef double _SERIES_CUTOFF = 1e-8


def oblique_geodesic(a, xi, double t):
    cdef const double[:, :] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, :] xv = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t m = av.shape[0], k = av.shape[1], i, j
    out = np.empty((m, k), dtype=np.float64)
    cdef double[:, :] ov = out
    cdef double nrm, theta, coef, c, s
    for j in range(k):
        nrm = 0.0
        for i in range(m):
            nrm += xv[i, j] * xv[i, j]
        nrm = sqrt(nrm)
        theta = t * nrm
        if theta == 0.0:
            for i in range(m):
                ov[i, j] = av[i, j]
            continue
        if fabs(theta) < _SERIES_CUTOFF:
            coef = t * (1.0 - theta * theta / 6.0)
        else:
            coef = sin(theta) / nrm
        c = cos(theta)
        s = 0.0
        for i in range(m):
            ov[i, j] = av[i, j] * c + xv[i, j] * coef
            s += ov[i, j] * ov[i, j]
        s = sqrt(s)
        for i in range(m):
            ov[i, j] /= s
    return out


def oblique_transport(a, xi, double t, psi):
    cdef const double[:, :] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, :] xv = np.ascontiguousarray(xi, dtype=np.float64)
    cdef const double[:, :] pv = np.ascontiguousarray(psi, dtype=np.float64)
    cdef Py_ssize_t m = av.shape[0], k = av.shape[1], i, j
    out = np.empty((m, k), dtype=np.float64)
    cdef double[:, :] ov = out
    cdef double nrm2, nrm, proj, w, sa, cb
    for j in range(k):
        nrm2 = 0.0
        proj = 0.0
        for i in range(m):
            nrm2 += xv[i, j] * xv[i, j]
            proj += xv[i, j] * pv[i, j]
        if nrm2 == 0.0:
            for i in range(m):
                ov[i, j] = pv[i, j]
            continue
        nrm = sqrt(nrm2)
        w = proj / nrm2
        sa = nrm * sin(t * nrm)
        cb = 1.0 - cos(t * nrm)
        for i in range(m):
            ov[i, j] = pv[i, j] - (av[i, j] * sa + xv[i, j] * cb) * w
    return out


def min_norm_l1(x, b):
    cdef const double[:, :] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, :] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t r = xv.shape[0], q = xv.shape[1], i, j
    out = np.empty((r, q), dtype=np.float64)
    cdef double[:, :] ov = out
    cdef double xe, be
    for i in range(r):
        for j in range(q):
            xe = xv[i, j]
            be = bv[i, j]
            if xe > 0.0:
                ov[i, j] = 1.0 + be
            elif xe < 0.0:
                ov[i, j] = -1.0 + be
            elif be > 1.0:
                ov[i, j] = be - 1.0
            elif be < -1.0:
                ov[i, j] = be + 1.0
            else:
                ov[i, j] = 0.0
    return out


def soft_threshold(v, double thr):
    arr = np.asarray(v, dtype=np.float64)
    cdef const double[:] vv = np.ascontiguousarray(arr).ravel()
    cdef Py_ssize_t n = vv.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[:] ov = out
    cdef double e
    for i in range(n):
        e = vv[i]
        if e > thr:
            ov[i] = e - thr
        elif e < -thr:
            ov[i] = e + thr
        else:
            ov[i] = 0.0
    return out.reshape(arr.shape)


def hard_threshold_columns(v, Py_ssize_t level):
    arr = np.asarray(v, dtype=np.float64)
    cdef Py_ssize_t d = arr.shape[0], q = arr.shape[1], j, r
    if level >= d:
        return arr.copy()
    out = np.zeros((d, q), dtype=np.float64)
    if level <= 0:
        return out
    order = np.argsort(-np.abs(arr), axis=0, kind="stable")
    cdef const Py_ssize_t[:, :] ordv = np.ascontiguousarray(order, dtype=np.intp)
    cdef const double[:, :] vv = np.ascontiguousarray(arr)
    cdef double[:, :] ov = out
    for j in range(q):
        for r in range(level):
            ov[ordv[r, j], j] = vv[ordv[r, j], j]
    return out


def smoothed_l1(x, double eps):
    arr = np.asarray(x, dtype=np.float64)
    cdef const double[:] xv = np.ascontiguousarray(arr).ravel()
    cdef Py_ssize_t n = xv.shape[0], i
    grad = np.empty(n, dtype=np.float64)
    cdef double[:] gv = grad
    cdef double total = 0.0, r, e2 = eps * eps
    for i in range(n):
        r = sqrt(xv[i] * xv[i] + e2)
        total += r
        gv[i] = xv[i] / r
    return total, grad.reshape(arr.shape)
