"""Numba kernels for the envelope (skyline) LDL^T factorization."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def ldlt_envelope(start, ptr, data, d, ztol):
    """Factor A = L D L^T in place inside the row envelope.

    `data` holds the lower triangle row by row: row i covers columns
    start[i]..i and begins at ptr[i].  On exit the strictly-lower entries
    contain L and `d` the pivots.  Returns -1 on success, or the row index
    at which a near-zero pivot (|d| <= ztol) was used as a divisor for a
    non-negligible entry, in which case the factorization is abandoned.
    """
    n = d.shape[0]
    for i in range(n):
        si = start[i]
        oi = ptr[i] - si  # data[oi + k] is entry (i, k)
        for j in range(si, i):
            sj = start[j]
            oj = ptr[j] - sj
            k0 = si if si > sj else sj
            acc = 0.0
            for k in range(k0, j):
                acc += data[oi + k] * data[oj + k]
            data[oi + j] -= acc
        # data[oi+k] now holds c_ik = L_ik * d_k for k < i; normalize and
        # accumulate the diagonal update sum c_ik^2 / d_k.
        acc = 0.0
        for k in range(si, i):
            w = data[oi + k]
            dk = d[k]
            if abs(dk) <= ztol:
                if abs(w) <= ztol:
                    data[oi + k] = 0.0
                    continue
                return i
            lik = w / dk
            acc += w * lik
            data[oi + k] = lik
        d[i] = data[oi + i] - acc
    return -1


@njit(cache=True, nogil=True)
def envelope_fill(start, ptr, rows, cols, vals, data):
    """Scatter-add COO triples (lower triangle) into envelope storage."""
    for k in range(rows.shape[0]):
        i = rows[k]
        j = cols[k]
        data[ptr[i] + j - start[i]] += vals[k]
