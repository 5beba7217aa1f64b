# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels on 64-bit integers.

Same contracts as :mod:`qpa._pykernels`; the caller guarantees every
intermediate value fits in int64 (see :mod:`qpa.kernels`).
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t

BACKEND = "cython"


def submultiset_sums(values):
    cdef int64_t[::1] xs = np.ascontiguousarray(values, dtype=np.int64)
    cdef Py_ssize_t k, n, i, j, m
    cdef int64_t x, z
    cdef long long steps = 0
    cdef int64_t[::1] sums
    cdef int64_t[::1] new

    sums_arr = np.zeros(1, dtype=np.int64)
    sums = sums_arr
    n = 1
    for k in range(xs.shape[0]):
        x = xs[k]
        new_arr = np.empty(2 * n, dtype=np.int64)
        new = new_arr
        if x > 0:
            new[0] = sums[0]
            m = 1
            i = 1
            for j in range(n):
                z = x + sums[j]
                while i < n and sums[i] < z:
                    new[m] = sums[i]
                    m += 1
                    i += 1
                new[m] = z
                m += 1
                if i < n and sums[i] == z:
                    i += 1
            sums_arr = new_arr[:m]
        elif x < 0:
            # fill from the top so the result comes out ascending
            m = 2 * n - 1
            new[m] = sums[n - 1]
            i = n - 2
            for j in range(n - 1, -1, -1):
                z = x + sums[j]
                while i >= 0 and sums[i] > z:
                    m -= 1
                    new[m] = sums[i]
                    i -= 1
                m -= 1
                new[m] = z
                if i >= 0 and sums[i] == z:
                    i -= 1
            sums_arr = new_arr[m:]
        else:
            raise ValueError("zero elements must be removed before merging")
        sums = sums_arr
        steps += sums.shape[0]
        n = sums.shape[0]
    return np.asarray(sums_arr).tolist(), steps


def gray_accumulate(deltas, true_counts, false_counts, long long base, long long mult,
                    long long wmin, Py_ssize_t span):
    """Dense variant: returns (counts, paths) with counts[w - wmin] for w in range."""
    cdef int64_t[::1] d = np.ascontiguousarray(deltas, dtype=np.int64)
    cdef int64_t[::1] tc = np.ascontiguousarray(true_counts, dtype=np.int64)
    cdef int64_t[::1] fc = np.ascontiguousarray(false_counts, dtype=np.int64)
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t j
    cdef unsigned long long k, total
    cdef int64_t old, new, prod = 1, w = base
    cdef int zeros = 0
    out_arr = np.zeros(span, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    state_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] state = state_arr

    for j in range(n):
        if fc[j]:
            prod *= fc[j]
        else:
            zeros += 1
    if not zeros:
        out[w - wmin] += mult * prod
    total = (<unsigned long long> 1) << n
    for k in range(1, total):
        j = 0
        while not ((k >> j) & 1):
            j += 1
        if state[j]:
            old = tc[j]
            new = fc[j]
            w -= d[j]
        else:
            old = fc[j]
            new = tc[j]
            w += d[j]
        state[j] ^= 1
        if old:
            prod //= old
        else:
            zeros -= 1
        if new:
            prod *= new
        else:
            zeros += 1
        if not zeros:
            out[w - wmin] += mult * prod
    return out_arr, total
