"""Numba-compiled batch kernels.

Same contracts as ``_numpy``; see that module for parameter docs.
Import fails cleanly when numba is absent so the selector can fall back.
"""

import numpy as np
from numba import njit

BACKEND_NAME = "numba"


@njit(cache=True)
def _step_up(p_sorted, unit, levels, out):
    n_rep, n = p_sorted.shape
    for r in range(n_rep):
        best = 0
        lev = levels[r]
        for i in range(n):
            if p_sorted[r, i] <= lev * unit[i]:
                best = i + 1
        out[r] = best


@njit(cache=True)
def _step_down(p_sorted, crit, out):
    n_rep, n = p_sorted.shape
    for r in range(n_rep):
        count = n
        for i in range(n):
            if p_sorted[r, i] > crit[i]:
                count = i
                break
        out[r] = count


@njit(cache=True)
def _null_hits(null_sorted, counts, out):
    n_rep = null_sorted.shape[0]
    for r in range(n_rep):
        total = 0
        for i in range(counts[r]):
            total += null_sorted[r, i]
        out[r] = total


def step_up_counts(p_sorted, unit, levels):
    p_sorted = np.ascontiguousarray(p_sorted, dtype=np.float64)
    out = np.empty(p_sorted.shape[0], dtype=np.int64)
    if p_sorted.shape[1] == 0:
        out[:] = 0
        return out
    _step_up(
        p_sorted,
        np.ascontiguousarray(unit, dtype=np.float64),
        np.ascontiguousarray(levels, dtype=np.float64),
        out,
    )
    return out


def step_down_counts(p_sorted, crit):
    p_sorted = np.ascontiguousarray(p_sorted, dtype=np.float64)
    out = np.empty(p_sorted.shape[0], dtype=np.int64)
    if p_sorted.shape[1] == 0:
        out[:] = 0
        return out
    _step_down(p_sorted, np.ascontiguousarray(crit, dtype=np.float64), out)
    return out


def true_null_rejections(null_sorted, counts):
    null_sorted = np.ascontiguousarray(null_sorted, dtype=np.uint8)
    out = np.empty(null_sorted.shape[0], dtype=np.int64)
    if null_sorted.shape[1] == 0:
        out[:] = 0
        return out
    _null_hits(null_sorted, np.ascontiguousarray(counts, dtype=np.int64), out)
    return out
