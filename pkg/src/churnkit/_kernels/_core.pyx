# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Same contracts and arithmetic order as ``_pure``."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free, qsort

cnp.import_array()

NAME = "cython"


cdef struct Pair:
    double v
    Py_ssize_t pos


cdef int _cmp_pair(const void* a, const void* b) noexcept nogil:
    cdef const Pair* pa = <const Pair*>a
    cdef const Pair* pb = <const Pair*>b
    if pa.v < pb.v:
        return -1
    if pa.v > pb.v:
        return 1
    if pa.pos < pb.pos:
        return -1
    if pa.pos > pb.pos:
        return 1
    return 0


cdef inline double _midpoint(double lo, double hi) noexcept nogil:
    cdef double thr = (lo + hi) / 2.0
    if thr <= lo:
        thr = hi
    return thr


cdef inline void _sort_column(const double[:, ::1] X, const cnp.intp_t[::1] rows,
                              Py_ssize_t f, Pair* buf) noexcept nogil:
    cdef Py_ssize_t i, m = rows.shape[0]
    for i in range(m):
        buf[i].v = X[rows[i], f]
        buf[i].pos = i
    qsort(buf, m, sizeof(Pair), _cmp_pair)


def gbt_best_split(const double[:, ::1] X, const cnp.intp_t[::1] rows,
                   const double[::1] g, const double[::1] h,
                   const cnp.intp_t[::1] features,
                   double G, double H, double lam, double gamma,
                   double min_child_weight):
    cdef Py_ssize_t m = rows.shape[0], nf = features.shape[0]
    cdef Py_ssize_t best_f = -1, fi, f, i
    cdef double best_thr = 0.0, best_gain = 0.0, best_gl = 0.0, best_hl = 0.0
    cdef double parent, gl, hl, gr, hr, lt, rt, gain
    cdef Pair* buf
    if m < 2:
        return best_f, best_thr, best_gain, best_gl, best_hl
    parent = G * G / (H + lam) if H + lam > 0 else 0.0
    buf = <Pair*>malloc(m * sizeof(Pair))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for fi in range(nf):
                f = features[fi]
                _sort_column(X, rows, f, buf)
                gl = 0.0
                hl = 0.0
                for i in range(m - 1):
                    gl = gl + g[rows[buf[i].pos]]
                    hl = hl + h[rows[buf[i].pos]]
                    if not (buf[i].v < buf[i + 1].v):
                        continue
                    gr = G - gl
                    hr = H - hl
                    lt = gl * gl / (hl + lam) if hl + lam > 0 else 0.0
                    rt = gr * gr / (hr + lam) if hr + lam > 0 else 0.0
                    gain = 0.5 * (lt + rt - parent) - gamma
                    if hl >= min_child_weight and hr >= min_child_weight and gain > best_gain:
                        best_f = f
                        best_gain = gain
                        best_gl = gl
                        best_hl = hl
                        best_thr = _midpoint(buf[i].v, buf[i + 1].v)
    finally:
        free(buf)
    return best_f, best_thr, best_gain, best_gl, best_hl


def gini_best_split(const double[:, ::1] X, const cnp.intp_t[::1] rows,
                    const cnp.int64_t[::1] y, const cnp.intp_t[::1] features,
                    double min_samples_leaf, double min_decrease):
    cdef Py_ssize_t n = rows.shape[0], nf = features.shape[0]
    cdef Py_ssize_t best_f = -1, fi, f, i
    cdef double best_thr = 0.0, best_dec = min_decrease
    cdef double P = 0.0, Q, parent, nd, nl, nr, pl, ql, pr, qr, dec
    cdef Pair* buf
    if n < 2:
        return -1, 0.0, 0.0
    for i in range(n):
        P += <double>y[rows[i]]
    nd = <double>n
    Q = nd - P
    parent = (P * P + Q * Q) / nd
    buf = <Pair*>malloc(n * sizeof(Pair))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for fi in range(nf):
                f = features[fi]
                _sort_column(X, rows, f, buf)
                pl = 0.0
                for i in range(n - 1):
                    pl = pl + <double>y[rows[buf[i].pos]]
                    nl = <double>(i + 1)
                    nr = nd - nl
                    ql = nl - pl
                    pr = P - pl
                    qr = nr - pr
                    dec = ((pl * pl + ql * ql) / nl + (pr * pr + qr * qr) / nr - parent) / nd
                    if (buf[i].v < buf[i + 1].v and nl >= min_samples_leaf
                            and nr >= min_samples_leaf and dec > best_dec):
                        best_f = f
                        best_dec = dec
                        best_thr = _midpoint(buf[i].v, buf[i + 1].v)
    finally:
        free(buf)
    if best_f < 0:
        return -1, 0.0, 0.0
    return best_f, best_thr, best_dec


def predict_tree(const cnp.int64_t[::1] feature, const double[::1] threshold,
                 const cnp.int64_t[::1] left, const cnp.int64_t[::1] right,
                 const double[::1] value, const double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0], i
    cdef cnp.int64_t node, f
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            node = 0
            f = feature[node]
            while f >= 0:
                if X[i, f] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
                f = feature[node]
            o[i] = value[node]
    return out


cdef void _shap_recurse(const cnp.int64_t[::1] feature, const double[::1] threshold,
                        const cnp.int64_t[::1] left, const cnp.int64_t[::1] right,
                        const double[::1] value, const double[::1] x,
                        const double[:, ::1] B, Py_ssize_t bi,
                        const double[:, ::1] W, double[::1] phi,
                        signed char* state, Py_ssize_t* path, Py_ssize_t plen,
                        Py_ssize_t node, Py_ssize_t a, Py_ssize_t c) noexcept nogil:
    cdef cnp.int64_t f
    cdef Py_ssize_t k, j
    cdef double v, thr
    cdef bint x_left, b_left
    while True:
        f = feature[node]
        if f < 0:
            v = value[node]
            for k in range(plen):
                j = path[k]
                if state[j] == 1:
                    phi[j] += v * W[a, c]
                else:
                    phi[j] -= v * W[c, a]
            return
        thr = threshold[node]
        x_left = x[f] < thr
        b_left = B[bi, f] < thr
        if x_left == b_left or state[f] == 1:
            node = left[node] if x_left else right[node]
        elif state[f] == 2:
            node = left[node] if b_left else right[node]
        else:
            path[plen] = f
            state[f] = 1
            _shap_recurse(feature, threshold, left, right, value, x, B, bi, W, phi,
                          state, path, plen + 1,
                          left[node] if x_left else right[node], a + 1, c)
            state[f] = 2
            _shap_recurse(feature, threshold, left, right, value, x, B, bi, W, phi,
                          state, path, plen + 1,
                          left[node] if b_left else right[node], a, c + 1)
            state[f] = 0
            return


def interventional_tree_shap(const cnp.int64_t[::1] feature, const double[::1] threshold,
                             const cnp.int64_t[::1] left, const cnp.int64_t[::1] right,
                             const double[::1] value, const double[::1] x,
                             const double[:, ::1] B, const double[:, ::1] W,
                             double[::1] phi):
    cdef Py_ssize_t d = x.shape[0], i, nb = B.shape[0]
    cdef signed char* state = <signed char*>malloc(d * sizeof(signed char))
    cdef Py_ssize_t* path = <Py_ssize_t*>malloc((d + 1) * sizeof(Py_ssize_t))
    if state == NULL or path == NULL:
        free(state)
        free(path)
        raise MemoryError()
    try:
        with nogil:
            for i in range(d):
                state[i] = 0
            for i in range(nb):
                _shap_recurse(feature, threshold, left, right, value, x, B, i, W, phi,
                              state, path, 0, 0, 0, 0)
    finally:
        free(state)
        free(path)
