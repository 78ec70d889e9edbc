"""Inference after selection: FCR intervals and FDR thresholding.

Selecting which parameters to look at changes what a confidence
interval has to deliver.  fcr_intervals widens ordinary z-intervals
just enough that the expected share of non-covering intervals among
the selected stays at q.  fdr_threshold_estimate keeps the estimates
a step-up scan certifies and zeroes the rest, a hard-threshold
estimator that does well when the true mean vector is sparse.

Standard errors are taken as known throughout: these are z-intervals,
so the simulations exercise the selection adjustment and nothing else.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from ._rng import check_seed, replicate_rng
from .errors import ValidationError
from .procedures import bh_step_up
from .two_groups import p_from_z

__all__ = [
    "EstimateSet",
    "IntervalSet",
    "SparseMeansScenario",
    "FcrStudyReport",
    "ThresholdRiskReport",
    "fcr_intervals",
    "fdr_threshold_estimate",
    "fcr_study",
    "threshold_risk_study",
]


@dataclass(frozen=True, eq=False)
class EstimateSet:
    """Point estimates with their standard errors, plus optional truth."""

    estimates: np.ndarray
    std_errors: np.ndarray
    truth: np.ndarray | None = None

    def __post_init__(self):
        est = np.asarray(self.estimates, dtype=np.float64)
        se = np.asarray(self.std_errors, dtype=np.float64)
        if est.ndim != 1:
            raise ValidationError("estimates must be one-dimensional")
        if se.shape != est.shape:
            raise ValidationError("std_errors must match estimates in length")
        if est.size and not np.all(np.isfinite(est)):
            raise ValidationError("estimates must be finite")
        if se.size and (not np.all(np.isfinite(se)) or se.min() <= 0.0):
            raise ValidationError("std_errors must be positive and finite")
        object.__setattr__(self, "estimates", est)
        object.__setattr__(self, "std_errors", se)
        if self.truth is not None:
            truth = np.asarray(self.truth, dtype=np.float64)
            if truth.shape != est.shape:
                raise ValidationError("truth must match estimates in length")
            object.__setattr__(self, "truth", truth)

    @property
    def n(self):
        return self.estimates.size


@dataclass(frozen=True, eq=False)
class IntervalSet:
    """Intervals for the selected coordinates.

    marginal_level is 1 - R q / n, shared by every interval; z_star is
    the matching normal quantile, None when nothing was selected.
    """

    selected: np.ndarray
    estimates: np.ndarray
    std_errors: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    marginal_level: float
    z_star: float | None
    n: int
    q: float

    @property
    def r(self):
        return int(self.selected.size)


def fcr_intervals(est, q):
    """Intervals for BH-selected coordinates at false coverage rate q.

    Selection runs bh_step_up on the two-sided p-values of est/se.
    With R of n coordinates selected, each selected coordinate gets the
    symmetric normal interval at marginal level 1 - R q / n.  Selecting
    everything therefore reproduces the unadjusted 1 - q interval, and
    harsher selection buys proportionally wider intervals.
    """
    if not isinstance(est, EstimateSet):
        raise ValidationError("fcr_intervals expects an EstimateSet")
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ValidationError(f"level q must lie strictly inside (0, 1), got {q}")
    n = est.n
    if n == 0:
        return IntervalSet(
            selected=np.empty(0, dtype=np.int64),
            estimates=np.empty(0),
            std_errors=np.empty(0),
            lower=np.empty(0),
            upper=np.empty(0),
            marginal_level=1.0,
            z_star=None,
            n=0,
            q=q,
        )
    p = p_from_z(est.estimates / est.std_errors, "two_sided")
    selection = bh_step_up(p, q)
    selected = selection.rejected
    r = selected.size
    marginal_level = 1.0 - r * q / n
    if r == 0:
        return IntervalSet(
            selected=selected,
            estimates=np.empty(0),
            std_errors=np.empty(0),
            lower=np.empty(0),
            upper=np.empty(0),
            marginal_level=marginal_level,
            z_star=None,
            n=n,
            q=q,
        )
    z_star = float(norm.ppf(1.0 - (1.0 - marginal_level) / 2.0))
    centers = est.estimates[selected]
    halves = z_star * est.std_errors[selected]
    return IntervalSet(
        selected=selected,
        estimates=centers,
        std_errors=est.std_errors[selected],
        lower=centers - halves,
        upper=centers + halves,
        marginal_level=marginal_level,
        z_star=z_star,
        n=n,
        q=q,
    )


def fdr_threshold_estimate(est, q):
    """Hard-threshold estimator driven by a BH scan.

    Returns est_i where hypothesis i is rejected by bh_step_up on the
    two-sided p-values, exactly 0 elsewhere.  The support of the output
    is the rejection set by construction.
    """
    if not isinstance(est, EstimateSet):
        raise ValidationError("fdr_threshold_estimate expects an EstimateSet")
    out = np.zeros(est.n)
    if est.n == 0:
        return out
    p = p_from_z(est.estimates / est.std_errors, "two_sided")
    selection = bh_step_up(p, q)
    out[selection.rejected] = est.estimates[selection.rejected]
    return out


@dataclass(frozen=True)
class SparseMeansScenario:
    """Normal-means simulation: theta_i observed plus unit noise.

    The last n_signals coordinates carry the signal height, the rest
    are zero.  Standard errors are known and equal to one.
    """

    n: int
    n_signals: int
    signal: float
    replicates: int
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"need n >= 1, got {self.n}")
        if not 0 <= self.n_signals <= self.n:
            raise ValidationError(
                f"need 0 <= n_signals <= n, got {self.n_signals} of {self.n}"
            )
        if not math.isfinite(self.signal):
            raise ValidationError("signal height must be finite")
        if self.replicates < 1:
            raise ValidationError(f"need replicates >= 1, got {self.replicates}")
        check_seed(self.seed)

    def truth(self):
        theta = np.zeros(self.n)
        if self.n_signals:
            theta[self.n - self.n_signals:] = self.signal
        return theta


@dataclass(frozen=True)
class FcrStudyReport:
    """Realized false coverage rate over replicated selections."""

    fcr_hat: float
    mc_se_fcr: float | None
    mean_selected: float
    share_with_selection: float
    replicates: int
    seed: int
    q: float
    n: int
    n_signals: int
    signal: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class ThresholdRiskReport:
    """Squared-error comparison of sparse-means estimators.

    mse_* are mean per-coordinate squared errors.  The paired fields
    describe per-replicate MSE differences of the FDR estimator against
    the universal-threshold estimator, negative meaning the FDR
    estimator wins.
    """

    mse_fdr: float
    mse_universal: float
    mse_zero: float
    mean_fdr_minus_universal: float
    se_fdr_minus_universal: float | None
    universal_threshold: float
    replicates: int
    seed: int
    q: float
    n: int
    n_signals: int
    signal: float

    def to_dict(self):
        return dict(self.__dict__)


def fcr_study(scenario, q):
    """Monte Carlo check of the FCR property under normal data.

    Each replicate draws y ~ N(theta, I), builds fcr_intervals at q,
    and scores the fraction of selected intervals missing their theta.
    Replicates without a selection contribute zero, matching the rate's
    definition.
    """
    if not isinstance(scenario, SparseMeansScenario):
        raise ValidationError("fcr_study expects a SparseMeansScenario")
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ValidationError(f"level q must lie strictly inside (0, 1), got {q}")
    theta = scenario.truth()
    ones = np.ones(scenario.n)
    misses = []
    selected_counts = []
    for idx in range(scenario.replicates):
        rng = replicate_rng(scenario.seed, idx)
        y = theta + rng.standard_normal(scenario.n)
        intervals = fcr_intervals(EstimateSet(y, ones, truth=theta), q)
        r = intervals.r
        selected_counts.append(r)
        if r == 0:
            misses.append(0.0)
            continue
        t = theta[intervals.selected]
        missed = np.sum((t < intervals.lower) | (t > intervals.upper))
        misses.append(float(missed) / r)
    reps = scenario.replicates
    fcr_hat = math.fsum(misses) / reps
    if reps > 1:
        var = math.fsum((m - fcr_hat) ** 2 for m in misses) / (reps - 1)
        se = math.sqrt(max(var, 0.0) / reps)
    else:
        se = None
    return FcrStudyReport(
        fcr_hat=fcr_hat,
        mc_se_fcr=se,
        mean_selected=math.fsum(selected_counts) / reps,
        share_with_selection=sum(1 for c in selected_counts if c) / reps,
        replicates=reps,
        seed=scenario.seed,
        q=q,
        n=scenario.n,
        n_signals=scenario.n_signals,
        signal=scenario.signal,
    )


def threshold_risk_study(scenario, q):
    """Empirical risk of FDR thresholding against two fixed rules.

    Compares per-coordinate MSE of fdr_threshold_estimate, the
    universal hard threshold sqrt(2 ln n), and the zero estimator on
    the same replicated data.
    """
    if not isinstance(scenario, SparseMeansScenario):
        raise ValidationError("threshold_risk_study expects a SparseMeansScenario")
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ValidationError(f"level q must lie strictly inside (0, 1), got {q}")
    theta = scenario.truth()
    ones = np.ones(scenario.n)
    lam = math.sqrt(2.0 * math.log(scenario.n)) if scenario.n > 1 else 0.0
    mse_zero_value = float(np.mean(theta**2))
    fdr_mses = []
    uni_mses = []
    for idx in range(scenario.replicates):
        rng = replicate_rng(scenario.seed, idx)
        y = theta + rng.standard_normal(scenario.n)
        fdr_est = fdr_threshold_estimate(EstimateSet(y, ones), q)
        uni_est = np.where(np.abs(y) > lam, y, 0.0)
        fdr_mses.append(float(np.mean((fdr_est - theta) ** 2)))
        uni_mses.append(float(np.mean((uni_est - theta) ** 2)))
    reps = scenario.replicates
    mse_fdr = math.fsum(fdr_mses) / reps
    mse_uni = math.fsum(uni_mses) / reps
    diffs = [a - b for a, b in zip(fdr_mses, uni_mses)]
    mean_diff = math.fsum(diffs) / reps
    if reps > 1:
        var = math.fsum((d - mean_diff) ** 2 for d in diffs) / (reps - 1)
        se_diff = math.sqrt(max(var, 0.0) / reps)
    else:
        se_diff = None
    return ThresholdRiskReport(
        mse_fdr=mse_fdr,
        mse_universal=mse_uni,
        mse_zero=mse_zero_value,
        mean_fdr_minus_universal=mean_diff,
        se_fdr_minus_universal=se_diff,
        universal_threshold=lam,
        replicates=reps,
        seed=scenario.seed,
        q=q,
        n=scenario.n,
        n_signals=scenario.n_signals,
        signal=scenario.signal,
    )
