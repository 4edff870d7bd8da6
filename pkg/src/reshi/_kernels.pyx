# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tree kernels; see _kernels_py.py for the reference semantics."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def best_split(X, y, Py_ssize_t min_leaf):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], l = Xv.shape[1]
    cdef Py_ssize_t f, k, i
    cdef long best_feature = -1
    cdef double best_threshold = np.nan, best_gain = 0.0
    cdef double total, sl, sr, nl, nr, gain, fbest, fthr
    cdef bint found
    cdef cnp.intp_t[::1] order
    cdef double[::1] xs = np.empty(n, dtype=np.float64)
    cdef double[::1] ys = np.empty(n, dtype=np.float64)
    if n < 2 * min_leaf:
        return best_feature, best_threshold, best_gain
    for f in range(l):
        order = np.argsort(np.asarray(Xv[:, f]), kind="stable")
        for i in range(n):
            xs[i] = Xv[order[i], f]
            ys[i] = yv[order[i]]
        total = 0.0
        for i in range(n):
            total = total + ys[i]
        sl = 0.0
        for i in range(min_leaf - 1):
            sl = sl + ys[i]
        found = False
        fbest = 0.0
        fthr = 0.0
        for k in range(min_leaf - 1, n - min_leaf):
            sl = sl + ys[k]
            if not xs[k] < xs[k + 1]:
                continue
            nl = <double>(k + 1)
            nr = <double>n - nl
            sr = total - sl
            gain = sl * sl / nl + sr * sr / nr - total * total / <double>n
            if not found or gain > fbest:
                found = True
                fbest = gain
                fthr = (xs[k] + xs[k + 1]) / 2.0
        if found and fbest > best_gain:
            best_gain = fbest
            best_feature = f
            best_threshold = fthr
    return best_feature, best_threshold, best_gain


def predict_batch(feature, threshold, left, right, value, X):
    cdef long[::1] fv = np.ascontiguousarray(feature, dtype=np.int_)
    cdef double[::1] tv = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef long[::1] lv = np.ascontiguousarray(left, dtype=np.int_)
    cdef long[::1] rv = np.ascontiguousarray(right, dtype=np.int_)
    cdef double[::1] vv = np.ascontiguousarray(value, dtype=np.float64)
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    out = np.empty(Xv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    cdef long node
    for i in range(Xv.shape[0]):
        node = 0
        while fv[node] >= 0:
            if Xv[i, fv[node]] <= tv[node]:
                node = lv[node]
            else:
                node = rv[node]
        ov[i] = vv[node]
    return out
