# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the numpy kernels in pykernels.py.

Same contracts, same arithmetic per element; see pykernels for the
authoritative semantics. Sequential accumulation order may differ from
numpy's pairwise summation at the last-ulp level.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()

LINKAGE_AVERAGE = 0
LINKAGE_SINGLE = 1
LINKAGE_COMPLETE = 2


def pearson_pairs(const double[:, ::1] values, const unsigned char[:, ::1] mask,
                  long min_overlap):
    """Pairwise-complete Pearson over all column pairs; see pykernels."""
    cdef Py_ssize_t T = values.shape[0]
    cdef Py_ssize_t N = values.shape[1]
    corr_arr = np.zeros((N, N), dtype=np.float64)
    count_arr = np.zeros((N, N), dtype=np.int64)
    defined_arr = np.zeros((N, N), dtype=np.uint8)
    cdef double[:, ::1] corr = corr_arr
    cdef long long[:, ::1] count = count_arr
    cdef unsigned char[:, ::1] defined = defined_arr
    cdef Py_ssize_t i, j, t
    cdef long long n, nobs
    cdef double sx, sy, mx, my, sxx, syy, sxy, dx, dy, v, r
    cdef double xfirst, yfirst
    cdef bint xconst, yconst

    for i in range(N):
        nobs = 0
        for t in range(T):
            if mask[t, i]:
                nobs += 1
        count[i, i] = nobs
        corr[i, i] = 1.0
        defined[i, i] = 1

    for i in range(N):
        for j in range(i + 1, N):
            n = 0
            sx = 0.0
            sy = 0.0
            xfirst = 0.0
            yfirst = 0.0
            xconst = True
            yconst = True
            for t in range(T):
                if mask[t, i] and mask[t, j]:
                    if n == 0:
                        xfirst = values[t, i]
                        yfirst = values[t, j]
                    else:
                        if values[t, i] != xfirst:
                            xconst = False
                        if values[t, j] != yfirst:
                            yconst = False
                    sx += values[t, i]
                    sy += values[t, j]
                    n += 1
            count[i, j] = n
            count[j, i] = n
            if n < min_overlap or n == 0:
                continue
            if xconst or yconst:
                continue
            mx = sx / n
            my = sy / n
            sxx = 0.0
            syy = 0.0
            sxy = 0.0
            for t in range(T):
                if mask[t, i] and mask[t, j]:
                    dx = values[t, i] - mx
                    dy = values[t, j] - my
                    sxx += dx * dx
                    syy += dy * dy
                    sxy += dx * dy
            if sxx <= 0.0 or syy <= 0.0:
                continue
            r = sxy / sqrt(sxx * syy)
            if r > 1.0:
                r = 1.0
            elif r < -1.0:
                r = -1.0
            corr[i, j] = r
            corr[j, i] = r
            defined[i, j] = 1
            defined[j, i] = 1
    return corr_arr, count_arr, defined_arr.view(bool)


def rolling_median_masked(const double[:, ::1] values,
                          const unsigned char[:, ::1] mask, long window):
    """Centered masked rolling median per column; see pykernels."""
    cdef Py_ssize_t T = values.shape[0]
    cdef Py_ssize_t N = values.shape[1]
    cdef long half = window // 2
    out_arr = np.zeros((T, N), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    buf_arr = np.empty(window, dtype=np.float64)
    cdef double[::1] buf = buf_arr
    cdef Py_ssize_t t, c, w, lo, hi, k, p
    cdef double v

    for c in range(N):
        for t in range(T):
            if not mask[t, c]:
                continue
            lo = t - half
            if lo < 0:
                lo = 0
            hi = t + half + 1
            if hi > T:
                hi = T
            k = 0
            for w in range(lo, hi):
                if mask[w, c]:
                    # insertion sort into buf[0:k]
                    v = values[w, c]
                    p = k
                    while p > 0 and buf[p - 1] > v:
                        buf[p] = buf[p - 1]
                        p -= 1
                    buf[p] = v
                    k += 1
            if k % 2 == 1:
                out[t, c] = buf[k // 2]
            else:
                out[t, c] = 0.5 * (buf[k // 2 - 1] + buf[k // 2])
    return out_arr


def nn_chain(const double[:, :] dist, long linkage):
    """Raw NN-chain merges (slot_a, slot_b, height); see pykernels."""
    cdef Py_ssize_t n = dist.shape[0]
    W_arr = np.array(dist, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] W = W_arr
    size_arr = np.ones(n, dtype=np.int64)
    cdef long long[::1] size = size_arr
    alive_arr = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] alive = alive_arr
    raw_arr = np.empty((n - 1, 3), dtype=np.float64)
    cdef double[:, ::1] raw = raw_arr
    chain_arr = np.empty(n + 1, dtype=np.int64)
    cdef long long[::1] chain = chain_arr
    cdef Py_ssize_t clen = 0
    cdef Py_ssize_t k, a, b, prev, c, i, keep, drop
    cdef double m, height, na, nb

    for i in range(n):
        W[i, i] = INFINITY

    for k in range(n - 1):
        if clen == 0:
            for i in range(n):
                if alive[i]:
                    chain[0] = i
                    break
            clen = 1
        while True:
            a = <Py_ssize_t> chain[clen - 1]
            prev = <Py_ssize_t> chain[clen - 2] if clen >= 2 else -1
            c = -1
            m = INFINITY
            for i in range(n):
                if W[a, i] < m:
                    m = W[a, i]
                    c = i
            if prev >= 0 and W[a, prev] == m:
                c = prev
            if c == prev:
                break
            chain[clen] = c
            clen += 1
        a = <Py_ssize_t> chain[clen - 1]
        b = <Py_ssize_t> chain[clen - 2]
        clen -= 2
        height = W[a, b]
        if a < b:
            keep = a
            drop = b
        else:
            keep = b
            drop = a
        raw[k, 0] = keep
        raw[k, 1] = drop
        raw[k, 2] = height
        na = <double> size[a]
        nb = <double> size[b]
        for i in range(n):
            if not alive[i] or i == a or i == b:
                continue
            if linkage == 0:
                m = (na * W[a, i] + nb * W[b, i]) / (na + nb)
            elif linkage == 1:
                m = W[a, i] if W[a, i] < W[b, i] else W[b, i]
            else:
                m = W[a, i] if W[a, i] > W[b, i] else W[b, i]
            W[keep, i] = m
            W[i, keep] = m
        W[keep, keep] = INFINITY
        for i in range(n):
            W[drop, i] = INFINITY
            W[i, drop] = INFINITY
        alive[drop] = 0
        size[keep] = size[a] + size[b]
    return raw_arr
