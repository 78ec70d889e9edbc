"""Step-up and step-down multiple-testing procedures.

Everything here operates on a flat vector of p-values and returns a
RejectionResult.  The scans are written in plain numpy for clarity; the
simulation pipeline has separate batched kernels that tests reconcile
against these reference implementations.

Conventions:

* hypothesis indices are 0-based positions into the input vector,
* ties are handled by the scan semantics themselves: a step-up scan
  takes the largest passing rank, so equal p-values at the boundary are
  either all in or all out, and step-down bounds are strictly increasing
  in rank so equal values cannot straddle the stopping point,
* an empty input yields an empty result rather than an error.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "PValueSet",
    "RejectionResult",
    "StageTrace",
    "bh_step_up",
    "by_step_up",
    "adaptive_step_down",
    "two_stage_adaptive",
    "weighted_bh",
    "bonferroni",
    "adjusted_pvalues",
]


def _as_pvalues(p):
    if isinstance(p, PValueSet):
        return p.values
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"p-values must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValidationError("p-values must be finite")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValidationError("p-values must lie in [0, 1]")
    return arr


def _check_level(q):
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ValidationError(f"level q must lie strictly inside (0, 1), got {q}")
    return q


@dataclass(frozen=True, eq=False)
class PValueSet:
    """Validated bundle of p-values with optional per-hypothesis metadata.

    ids default to "h0000", "h0001", ... and must be unique.  Weights,
    when present, must be positive and finite; they are stored as given
    and only rescaled inside weighted procedures.  cluster_labels group
    hypotheses for set-level testing, and truth_is_null carries ground
    truth in simulations.
    """

    values: np.ndarray
    ids: tuple = ()
    weights: np.ndarray | None = None
    cluster_labels: tuple | None = None
    truth_is_null: np.ndarray | None = None

    def __post_init__(self):
        values = _as_pvalues(self.values)
        object.__setattr__(self, "values", values)
        ids = tuple(self.ids) if self.ids else tuple(
            f"h{i:04d}" for i in range(values.size)
        )
        if len(ids) != values.size:
            raise ValidationError(
                f"{len(ids)} ids for {values.size} p-values"
            )
        if len(set(ids)) != len(ids):
            raise ValidationError("ids must be unique")
        object.__setattr__(self, "ids", ids)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != values.shape:
                raise ValidationError("weights must match p-values in length")
            if w.size and (not np.all(np.isfinite(w)) or w.min() <= 0.0):
                raise ValidationError("weights must be positive and finite")
            object.__setattr__(self, "weights", w)
        if self.cluster_labels is not None:
            labels = tuple(self.cluster_labels)
            if len(labels) != values.size:
                raise ValidationError("cluster labels must match p-values in length")
            object.__setattr__(self, "cluster_labels", labels)
        if self.truth_is_null is not None:
            truth = np.asarray(self.truth_is_null, dtype=bool)
            if truth.shape != values.shape:
                raise ValidationError("truth flags must match p-values in length")
            object.__setattr__(self, "truth_is_null", truth)

    @property
    def n(self):
        return self.values.size


@dataclass(frozen=True)
class StageTrace:
    """Audit record of a two-stage run: levels used, stage-1 count, null estimate."""

    stage1_level: float
    r1: int
    n0_estimate: float
    stage2_level: float | None
    variant: str


@dataclass(frozen=True, eq=False)
class RejectionResult:
    """Outcome of one procedure run.

    rejected   : sorted 0-based indices of rejected hypotheses.
    order      : hypothesis indices sorted by effective p-value (stable),
                 so order[:r] is the rejection set in scan order.
    thresholds : per-rank bounds the scan compared against, length n.
    adaptive_bounds : the per-rank null-count sequence for the adaptive
                 step-down procedure, None otherwise.
    stage_trace : populated by the two-stage procedure, None otherwise.
    """

    method: str
    n: int
    q: float
    rejected: np.ndarray
    order: np.ndarray
    thresholds: np.ndarray
    adaptive_bounds: np.ndarray | None = None
    stage_trace: StageTrace | None = None

    @property
    def r(self):
        return int(self.rejected.size)

    def rejected_mask(self):
        mask = np.zeros(self.n, dtype=bool)
        mask[self.rejected] = True
        return mask


def _result(method, q, order, count, thresholds, **extra):
    rejected = np.sort(order[:count])
    return RejectionResult(
        method=method,
        n=int(order.size),
        q=q,
        rejected=rejected,
        order=order,
        thresholds=np.asarray(thresholds, dtype=np.float64),
        **extra,
    )


def _step_up_count(p_sorted, thresholds):
    ok = np.nonzero(p_sorted <= thresholds)[0]
    return int(ok[-1]) + 1 if ok.size else 0


def bh_step_up(p, q):
    """Benjamini-Hochberg step-up at level q.

    Finds the largest rank k with p_(k) <= q k / n and rejects the k
    smallest p-values.  Controls FDR at q pi0 under independence.
    """
    p = _as_pvalues(p)
    q = _check_level(q)
    n = p.size
    order = np.argsort(p, kind="stable")
    thresholds = q * np.arange(1, n + 1) / n if n else np.empty(0)
    count = _step_up_count(p[order], thresholds)
    return _result("bh", q, order, count, thresholds)


def by_step_up(p, q):
    """Benjamini-Yekutieli step-up, valid under arbitrary dependence.

    Same scan as BH with every bound divided by the harmonic number
    H_n = 1 + 1/2 + ... + 1/n.
    """
    p = _as_pvalues(p)
    q = _check_level(q)
    n = p.size
    order = np.argsort(p, kind="stable")
    if n:
        h_n = math.fsum(1.0 / i for i in range(1, n + 1))
        thresholds = q * np.arange(1, n + 1) / (n * h_n)
    else:
        thresholds = np.empty(0)
    count = _step_up_count(p[order], thresholds)
    return _result("by", q, order, count, thresholds)


def adaptive_step_down(p, q):
    """Adaptive step-down scan with rank-dependent null-count bounds.

    At rank i the bound treats n0_i = n + 1 - i (1 - q) hypotheses as
    null and tests p_(i) <= q i / n0_i.  The scan walks ranks upward and
    stops at the first failure, rejecting everything before it; if no
    rank fails, all n are rejected.  The n0_i sequence is deliberately
    left unclamped, so n0_1 = n + q slightly exceeds n.
    """
    p = _as_pvalues(p)
    q = _check_level(q)
    n = p.size
    order = np.argsort(p, kind="stable")
    ranks = np.arange(1, n + 1, dtype=np.float64)
    n0 = n + 1.0 - ranks * (1.0 - q)
    thresholds = q * ranks / n0 if n else np.empty(0)
    failed = np.nonzero(p[order] > thresholds)[0]
    count = int(failed[0]) if failed.size else n
    return _result(
        "adaptive_step_down", q, order, count, thresholds, adaptive_bounds=n0
    )


def two_stage_adaptive(p, q, bound_variant="canonical"):
    """Two-stage adaptive step-up.

    Stage 1 runs BH at q* = q / (1 + q).  Its rejection count r1 turns
    into a null-count estimate, and stage 2 reruns BH at q* n / n0_hat.
    Degenerate stage-1 outcomes short-circuit: r1 = 0 rejects nothing,
    r1 = n rejects everything, and neither runs a second stage.

    bound_variant picks the null-count estimate:
      "canonical"  n0_hat = n - r1
      "discounted" n0_hat = n - r1 (1 - q), the looser bound that
                   discounts stage-1 rejections by 1 - q
    """
    p = _as_pvalues(p)
    q = _check_level(q)
    if bound_variant not in ("canonical", "discounted"):
        raise ValidationError(
            f"unknown bound_variant {bound_variant!r}; "
            "expected 'canonical' or 'discounted'"
        )
    n = p.size
    q_star = q / (1.0 + q)
    order = np.argsort(p, kind="stable")
    ranks = np.arange(1, n + 1, dtype=np.float64)
    stage1_thresholds = q_star * ranks / n if n else np.empty(0)
    r1 = _step_up_count(p[order], stage1_thresholds)

    if r1 == 0 or r1 == n:
        trace = StageTrace(q_star, r1, float(n - r1), None, bound_variant)
        return _result(
            "two_stage_adaptive", q, order, r1, stage1_thresholds, stage_trace=trace
        )

    if bound_variant == "canonical":
        n0_hat = float(n - r1)
    else:
        n0_hat = n - r1 * (1.0 - q)
    stage2_level = q_star * n / n0_hat
    stage2_thresholds = stage2_level * ranks / n
    count = _step_up_count(p[order], stage2_thresholds)
    trace = StageTrace(q_star, r1, n0_hat, stage2_level, bound_variant)
    return _result(
        "two_stage_adaptive", q, order, count, stage2_thresholds, stage_trace=trace
    )


def weighted_bh(p, weights=None, q=0.05):
    """BH on weighted p-values p_i / w_i.

    Weights are rescaled to average one, so the unweighted procedure is
    recovered exactly when all weights are equal.  Larger weight means a
    more generous bound for that hypothesis.  A PValueSet carrying
    weights may be passed alone.
    """
    if weights is None:
        if not isinstance(p, PValueSet) or p.weights is None:
            raise ValidationError("weighted_bh needs weights")
        weights = p.weights
    p = _as_pvalues(p)
    q = _check_level(q)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != p.shape:
        raise ValidationError("weights must match p-values in length")
    if w.size and (not np.all(np.isfinite(w)) or w.min() <= 0.0):
        raise ValidationError("weights must be positive and finite")
    n = p.size
    if n == 0:
        return _result("weighted_bh", q, np.empty(0, dtype=np.int64), 0, np.empty(0))
    w_unit = w * (n / math.fsum(w))
    effective = p / w_unit
    order = np.argsort(effective, kind="stable")
    thresholds = q * np.arange(1, n + 1) / n
    count = _step_up_count(effective[order], thresholds)
    return _result("weighted_bh", q, order, count, thresholds)


def bonferroni(p, q):
    """Bonferroni baseline: reject every p_i <= q / n.  Controls FWER."""
    p = _as_pvalues(p)
    q = _check_level(q)
    n = p.size
    order = np.argsort(p, kind="stable")
    thresholds = np.full(n, q / n) if n else np.empty(0)
    count = _step_up_count(p[order], thresholds)
    return _result("bonferroni", q, order, count, thresholds)


def adjusted_pvalues(p, method="bh"):
    """Monotone adjusted p-values for the step-up procedures.

    The adjusted value for a hypothesis is the smallest level at which
    it would be rejected: rank-scaled p-values, a running minimum from
    the largest rank down, then a cap at one.
    """
    p = _as_pvalues(p)
    n = p.size
    if n == 0:
        return np.empty(0)
    if method == "bh":
        scale = 1.0
    elif method == "by":
        scale = math.fsum(1.0 / i for i in range(1, n + 1))
    else:
        raise ValidationError(f"unknown adjustment method {method!r}")
    order = np.argsort(p, kind="stable")
    ranks = np.arange(1, n + 1, dtype=np.float64)
    scaled = p[order] * scale * n / ranks
    adjusted_sorted = np.minimum(np.minimum.accumulate(scaled[::-1])[::-1], 1.0)
    out = np.empty(n)
    out[order] = adjusted_sorted
    return out
