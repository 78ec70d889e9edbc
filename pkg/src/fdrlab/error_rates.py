"""Error-rate bookkeeping over simulation replicates.

A replicate reduces to the pair (v, r): how many rejections happened
and how many of them were true nulls.  Aggregation turns a batch of
such pairs into the four standard rates:

  FDR   mean of v/r with 0/0 read as 0
  pFDR  mean of v/r over replicates that rejected something
  Fdr   sum(v) / sum(r), the ratio-of-expectations form
  FWER  share of replicates with v > 0

All sums go through math.fsum so the report is bit-identical under any
reordering of the replicates.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ChainUndefinedError, ValidationError
from .procedures import RejectionResult

__all__ = [
    "ReplicateOutcome",
    "ErrorRateReport",
    "account",
    "aggregate",
    "identity_chain_gap",
]


@dataclass(frozen=True)
class ReplicateOutcome:
    """Rejection tally for one replicate: v true nulls among r rejections."""

    v: int
    r: int

    def __post_init__(self):
        if self.v < 0 or self.r < 0 or self.v > self.r:
            raise ValidationError(
                f"need 0 <= v <= r, got v={self.v}, r={self.r}"
            )

    @property
    def fdp(self):
        return self.v / self.r if self.r else 0.0


@dataclass(frozen=True)
class ErrorRateReport:
    """Aggregated rates over a batch of replicates.

    pfdr_hat is None when no replicate rejected anything; fdr_cap_hat
    is None in the same case (zero total rejections).  mc_se_fdr is the
    Monte Carlo standard error of fdr_hat, None for a single replicate.
    """

    n_replicates: int
    n_with_rejection: int
    fdr_hat: float
    pfdr_hat: float | None
    fdr_cap_hat: float | None
    fwer_hat: float
    mc_se_fdr: float | None
    mean_v: float
    mean_r: float

    def to_dict(self):
        return {
            "n_replicates": self.n_replicates,
            "n_with_rejection": self.n_with_rejection,
            "fdr_hat": self.fdr_hat,
            "pfdr_hat": self.pfdr_hat,
            "fdr_cap_hat": self.fdr_cap_hat,
            "fwer_hat": self.fwer_hat,
            "mc_se_fdr": self.mc_se_fdr,
            "mean_v": self.mean_v,
            "mean_r": self.mean_r,
        }


def account(truth_is_null, rejected):
    """Score one replicate against the ground truth.

    truth_is_null : boolean vector, True where the hypothesis is null.
    rejected      : RejectionResult or a vector of rejected indices.
    """
    truth = np.asarray(truth_is_null, dtype=bool)
    if isinstance(rejected, RejectionResult):
        idx = rejected.rejected
        if rejected.n != truth.size:
            raise ValidationError(
                f"truth has {truth.size} entries, result covers {rejected.n}"
            )
    else:
        idx = np.asarray(rejected, dtype=np.int64)
    if idx.size:
        if idx.min() < 0 or idx.max() >= truth.size:
            raise ValidationError("rejected index out of range")
        if np.unique(idx).size != idx.size:
            raise ValidationError("rejected indices must be distinct")
    return ReplicateOutcome(v=int(truth[idx].sum()), r=int(idx.size))


def aggregate(outcomes):
    """Collapse replicate outcomes into an ErrorRateReport."""
    pairs = [(o.v, o.r) if isinstance(o, ReplicateOutcome) else (int(o[0]), int(o[1]))
             for o in outcomes]
    for v, r in pairs:
        if v < 0 or v > r:
            raise ValidationError(f"need 0 <= v <= r, got v={v}, r={r}")
    n = len(pairs)
    if n == 0:
        raise ValidationError("cannot aggregate zero replicates")
    fdps = [v / r if r else 0.0 for v, r in pairs]
    fdr_hat = math.fsum(fdps) / n
    positive = [f for (f, (_, r)) in zip(fdps, pairs) if r > 0]
    n_pos = len(positive)
    pfdr_hat = math.fsum(positive) / n_pos if n_pos else None
    total_r = sum(r for _, r in pairs)
    total_v = sum(v for v, _ in pairs)
    fdr_cap_hat = total_v / total_r if total_r else None
    fwer_hat = sum(1 for v, _ in pairs if v > 0) / n
    if n > 1:
        var = math.fsum((f - fdr_hat) ** 2 for f in fdps) / (n - 1)
        mc_se_fdr = math.sqrt(max(var, 0.0) / n)
    else:
        mc_se_fdr = None
    return ErrorRateReport(
        n_replicates=n,
        n_with_rejection=n_pos,
        fdr_hat=fdr_hat,
        pfdr_hat=pfdr_hat,
        fdr_cap_hat=fdr_cap_hat,
        fwer_hat=fwer_hat,
        mc_se_fdr=mc_se_fdr,
        mean_v=total_v / n,
        mean_r=total_r / n,
    )


def identity_chain_gap(report):
    """Distances along the rate chain: (|FDR - pFDR|, |pFDR - Fdr|).

    The three rates coincide in the limit where some rejection is almost
    sure, so these gaps are a quick dependence / sparsity diagnostic.
    Raises ChainUndefinedError when the conditional rates do not exist.
    """
    if report.pfdr_hat is None or report.fdr_cap_hat is None:
        raise ChainUndefinedError(
            "pFDR and Fdr are undefined without any rejection; "
            "the identity chain cannot be evaluated"
        )
    return (
        abs(report.fdr_hat - report.pfdr_hat),
        abs(report.pfdr_hat - report.fdr_cap_hat),
    )
