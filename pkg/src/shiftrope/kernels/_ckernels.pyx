# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled core for the banded online-softmax attention pass.

Keys are processed in tiles against a transposed key buffer so score and
output accumulation run over contiguous, independent lanes (vectorizable
without float reassociation); each tile folds into the per-row running
(max, sum, output) state. Auxiliary memory is O(rows * d + tile).
"""

import numpy as np

from libc.math cimport exp, log, INFINITY

cdef Py_ssize_t MAX_TILE = 512


def banded_attention(
    double[:, ::1] qr,
    double[:, ::1] kr,
    double[:, ::1] v,
    Py_ssize_t window,
    double scale,
    Py_ssize_t tile_rows=128,
    Py_ssize_t tile_keys=128,
):
    """Row i attends keys [max(0, i - window + 1), i]; returns (out, lse, pairs).

    Signature-compatible with the numpy backend; tile_keys caps the score
    buffer per row (clamped to 512), tile_rows is accepted for parity.
    """
    cdef Py_ssize_t n = qr.shape[0]
    cdef Py_ssize_t d = qr.shape[1]
    if tile_keys < 1:
        tile_keys = 1
    elif tile_keys > MAX_TILE:
        tile_keys = MAX_TILE

    out_arr = np.zeros((n, d), dtype=np.float64)
    lse_arr = np.full(n, -INFINITY, dtype=np.float64)
    krt_arr = np.ascontiguousarray(np.asarray(kr).T)
    sbuf_arr = np.empty(MAX_TILE, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] lse = lse_arr
    cdef double[:, ::1] krt = krt_arr
    cdef double[::1] sbuf = sbuf_arr
    cdef Py_ssize_t i, j, t, jj, lo, c0, c1, width
    cdef double run_max, run_sum, tile_max, s, alpha, w, qv
    cdef long long pairs = 0

    for i in range(n):
        lo = i - window + 1
        if lo < 0:
            lo = 0
        run_max = -INFINITY
        run_sum = 0.0
        c0 = lo
        while c0 <= i:
            c1 = c0 + tile_keys
            if c1 > i + 1:
                c1 = i + 1
            width = c1 - c0
            for jj in range(width):
                sbuf[jj] = 0.0
            for t in range(d):
                qv = qr[i, t]
                for jj in range(width):
                    sbuf[jj] += qv * krt[t, c0 + jj]
            tile_max = -INFINITY
            for jj in range(width):
                sbuf[jj] *= scale
                if sbuf[jj] > tile_max:
                    tile_max = sbuf[jj]
            if tile_max > run_max:
                if run_max != -INFINITY:
                    alpha = exp(run_max - tile_max)
                    run_sum *= alpha
                    for t in range(d):
                        out[i, t] *= alpha
                run_max = tile_max
            for jj in range(width):
                w = exp(sbuf[jj] - run_max)
                run_sum += w
                j = c0 + jj
                for t in range(d):
                    out[i, t] += w * v[j, t]
            c0 = c1
        pairs += i + 1 - lo
        if run_sum > 0.0:
            for t in range(d):
                out[i, t] /= run_sum
            lse[i] = run_max + log(run_sum)

    return out_arr, lse_arr, int(pairs)
