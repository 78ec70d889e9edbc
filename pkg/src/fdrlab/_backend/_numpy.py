"""Pure-numpy batch kernels.

Each kernel takes replicate-major matrices of sorted p-values and returns
per-replicate rejection counts.  These are the reference implementations;
``_numba`` compiles loop versions of the same contracts.
"""

import numpy as np

BACKEND_NAME = "numpy"


def step_up_counts(p_sorted, unit, levels):
    """Rejection counts for a step-up scan with per-replicate levels.

    p_sorted : (R, n) ascending p-values per row.
    unit     : (n,) threshold shape; rank i uses levels[r] * unit[i-1].
    levels   : (R,) per-replicate level multipliers.

    Returns (R,) int64: max rank whose order statistic sits at or below
    its threshold, 0 when none does.
    """
    p_sorted = np.asarray(p_sorted, dtype=np.float64)
    n = p_sorted.shape[1]
    if n == 0:
        return np.zeros(p_sorted.shape[0], dtype=np.int64)
    ok = p_sorted <= np.asarray(levels, dtype=np.float64)[:, None] * np.asarray(
        unit, dtype=np.float64
    )[None, :]
    ranks = np.where(ok, np.arange(1, n + 1, dtype=np.int64)[None, :], 0)
    return ranks.max(axis=1)


def step_down_counts(p_sorted, crit):
    """Rejection counts for a step-down scan against a fixed bound vector.

    Walks ranks 1..n in order; the first rank whose order statistic
    exceeds crit[rank-1] stops the scan and rejects everything before it.
    Rows that never fail reject all n.
    """
    p_sorted = np.asarray(p_sorted, dtype=np.float64)
    n = p_sorted.shape[1]
    if n == 0:
        return np.zeros(p_sorted.shape[0], dtype=np.int64)
    bad = p_sorted > np.asarray(crit, dtype=np.float64)[None, :]
    first_bad = np.argmax(bad, axis=1).astype(np.int64)
    return np.where(bad.any(axis=1), first_bad, n)


def true_null_rejections(null_sorted, counts):
    """Count rejected true nulls per replicate.

    null_sorted : (R, n) uint8, 1 where the hypothesis at that sorted
                  position is a true null.
    counts      : (R,) rejection counts from a scan kernel.
    """
    null_sorted = np.asarray(null_sorted, dtype=np.uint8)
    counts = np.asarray(counts, dtype=np.int64)
    if null_sorted.shape[1] == 0:
        return np.zeros(null_sorted.shape[0], dtype=np.int64)
    prefix = np.cumsum(null_sorted, axis=1, dtype=np.int64)
    rows = np.arange(null_sorted.shape[0])
    return np.where(counts > 0, prefix[rows, np.maximum(counts, 1) - 1], 0)
