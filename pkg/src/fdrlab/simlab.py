"""Scenario-driven Monte Carlo engine.

A Scenario pins down everything about a replicated experiment: family
size, null share, signal strength, dependence structure, sidedness,
replicate count, master seed, and (for procedure studies) the
procedure to run.  Reports carry a hash of the canonical scenario
serialization so any result file can be traced to its exact inputs.

Replicates use independent counter-based streams keyed by (seed,
replicate index), and all aggregation reduces in replicate order with
exact summation, so reports are bit-identical for any worker count.
The per-replicate noise vector is drawn before any shared factor,
which makes runs at different correlation levels share their
idiosyncratic noise at equal seeds; paired comparisons across rho lean
on that.

Three dependence structures are supported: independent, equicorrelated
through a one-factor representation (exact for positive rho; negative
rho uses mean-centering, exact down to -1/(n-1)), and a common-control
design where every statistic shares one control sample, giving
pairwise correlation one half.
"""

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from ._rng import check_seed, replicate_rng
from .error_rates import ErrorRateReport, ReplicateOutcome, aggregate
from .errors import EmptyFilterError, ValidationError
from .two_groups import (
    NormalSpec,
    TwoGroupsModel,
    diagnose_null,
    estimate_local_fdr,
    local_fdr_exact,
    p_from_z,
    tail_fdr_exact,
)

__all__ = [
    "ProcedureSpec",
    "Scenario",
    "FilterSpec",
    "StudyReport",
    "FixedThresholdReport",
    "FilterRunResult",
    "FilterStudyReport",
    "LocalFdrStudyReport",
    "generate_replicate",
    "run_study",
    "fixed_threshold_study",
    "filter_then_test",
    "run_filter_study",
    "local_fdr_study",
    "scenario_hash",
    "load_run_config",
    "execute_run",
]

_CORRELATIONS = ("independent", "equicorrelated", "common_control")
_SIDEDNESS = ("one_sided", "two_sided")
_PROCEDURES = ("bh", "by", "adaptive_step_down", "two_stage_adaptive", "bonferroni")
_KS_ALPHA = 0.05


@dataclass(frozen=True)
class ProcedureSpec:
    """Which procedure a study runs, and at what level."""

    name: str
    q: float
    bound_variant: str = "canonical"

    def __post_init__(self):
        if self.name not in _PROCEDURES:
            raise ValidationError(
                f"unknown procedure {self.name!r}; expected one of {_PROCEDURES}"
            )
        if not 0.0 < self.q < 1.0:
            raise ValidationError(f"level q must lie strictly inside (0, 1), got {self.q}")
        if self.bound_variant not in ("canonical", "discounted"):
            raise ValidationError(
                f"unknown bound_variant {self.bound_variant!r}"
            )

    def to_dict(self):
        out = {"name": self.name, "q": self.q}
        if self.name == "two_stage_adaptive":
            out["bound_variant"] = self.bound_variant
        return out

    @classmethod
    def from_dict(cls, d):
        extra = set(d) - {"name", "q", "bound_variant"}
        if extra:
            raise ValidationError(f"unknown procedure fields: {sorted(extra)}")
        return cls(
            name=d.get("name", ""),
            q=d.get("q", 0.0),
            bound_variant=d.get("bound_variant", "canonical"),
        )


@dataclass(frozen=True)
class Scenario:
    """Full description of one replicated experiment."""

    n: int
    p0: float
    effect: float
    correlation: str = "independent"
    rho: float = 0.0
    sidedness: str = "two_sided"
    replicates: int = 1
    seed: int = 0
    procedure: ProcedureSpec | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"need n >= 1, got {self.n}")
        if not 0.0 <= self.p0 <= 1.0:
            raise ValidationError(f"p0 must lie in [0, 1], got {self.p0}")
        if not math.isfinite(self.effect):
            raise ValidationError("effect must be finite")
        if self.correlation not in _CORRELATIONS:
            raise ValidationError(
                f"unknown correlation {self.correlation!r}; "
                f"expected one of {_CORRELATIONS}"
            )
        if self.correlation == "equicorrelated":
            low = -1.0 / (self.n - 1) if self.n > 1 else 0.0
            if not low < self.rho < 1.0:
                raise ValidationError(
                    f"equicorrelated rho must satisfy {low:.6g} < rho < 1, "
                    f"got {self.rho}"
                )
        elif self.rho not in (0.0, None):
            raise ValidationError(
                f"rho only applies to equicorrelated scenarios, got {self.rho}"
            )
        if self.sidedness not in _SIDEDNESS:
            raise ValidationError(
                f"unknown sidedness {self.sidedness!r}; expected one of {_SIDEDNESS}"
            )
        if self.replicates < 1:
            raise ValidationError(f"need replicates >= 1, got {self.replicates}")
        check_seed(self.seed)

    @property
    def n_null(self):
        return int(round(self.p0 * self.n))

    def truth_is_null(self):
        truth = np.zeros(self.n, dtype=bool)
        truth[: self.n_null] = True
        return truth

    def to_dict(self):
        out = {
            "n": self.n,
            "p0": self.p0,
            "effect": self.effect,
            "correlation": self.correlation,
            "sidedness": self.sidedness,
            "replicates": self.replicates,
            "seed": self.seed,
        }
        if self.correlation == "equicorrelated":
            out["rho"] = self.rho
        if self.procedure is not None:
            out["procedure"] = self.procedure.to_dict()
        return out

    @classmethod
    def from_dict(cls, d):
        known = {
            "n", "p0", "effect", "correlation", "rho",
            "sidedness", "replicates", "seed", "procedure",
        }
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown scenario fields: {sorted(extra)}")
        missing = {"n", "p0", "effect", "replicates", "seed"} - set(d)
        if missing:
            raise ValidationError(f"scenario is missing fields: {sorted(missing)}")
        proc = d.get("procedure")
        return cls(
            n=int(d["n"]),
            p0=float(d["p0"]),
            effect=float(d["effect"]),
            correlation=d.get("correlation", "independent"),
            rho=float(d.get("rho", 0.0) or 0.0),
            sidedness=d.get("sidedness", "two_sided"),
            replicates=int(d["replicates"]),
            seed=int(d["seed"]),
            procedure=ProcedureSpec.from_dict(proc) if proc is not None else None,
        )


@dataclass(frozen=True)
class FilterSpec:
    """Variation filter applied to combined group data before testing.

    statistic "sample_sd" is the per-hypothesis standard deviation of
    the raw-scale samples; "fold_change" is max sample over min sample.
    threshold_kind "absolute" keeps hypotheses with statistic above
    threshold; "quantile" keeps those above the dataset's own quantile
    at that level.
    """

    statistic: str
    threshold: float
    samples_per_group: int
    threshold_kind: str = "absolute"

    def __post_init__(self):
        if self.statistic not in ("sample_sd", "fold_change"):
            raise ValidationError(
                f"unknown filter statistic {self.statistic!r}"
            )
        if self.threshold <= 0.0:
            raise ValidationError(f"threshold must be positive, got {self.threshold}")
        if self.threshold_kind not in ("absolute", "quantile"):
            raise ValidationError(
                f"unknown threshold_kind {self.threshold_kind!r}"
            )
        if self.threshold_kind == "quantile" and not self.threshold < 1.0:
            raise ValidationError(
                f"quantile threshold must lie in (0, 1), got {self.threshold}"
            )
        if self.samples_per_group < 2:
            raise ValidationError(
                f"need samples_per_group >= 2, got {self.samples_per_group}"
            )

    def to_dict(self):
        return {
            "statistic": self.statistic,
            "threshold": self.threshold,
            "threshold_kind": self.threshold_kind,
            "samples_per_group": self.samples_per_group,
        }

    @classmethod
    def from_dict(cls, d):
        known = {"statistic", "threshold", "threshold_kind", "samples_per_group"}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown filter fields: {sorted(extra)}")
        return cls(
            statistic=d.get("statistic", ""),
            threshold=float(d.get("threshold", 0.0)),
            samples_per_group=int(d.get("samples_per_group", 0)),
            threshold_kind=d.get("threshold_kind", "absolute"),
        )


def _replicate_noise(scenario, rng):
    """Correlated standard-normal noise for one replicate.

    The idiosyncratic vector comes first so scenarios differing only in
    correlation share it at equal (seed, index).
    """
    xi = rng.standard_normal(scenario.n)
    if scenario.correlation == "independent":
        return xi
    if scenario.correlation == "common_control":
        control = rng.standard_normal()
        return (xi - control) / math.sqrt(2.0)
    rho = scenario.rho
    if rho == 0.0:
        return xi
    if rho > 0.0:
        shared = rng.standard_normal()
        return math.sqrt(rho) * shared + math.sqrt(1.0 - rho) * xi
    t = rho / (1.0 - rho)
    c = 1.0 - math.sqrt(1.0 + scenario.n * t)
    centered = xi - c * xi.mean()
    return centered / math.sqrt(1.0 + t)


def generate_replicate(scenario, replicate_index):
    """One replicate's z-values and truth mask, deterministic in (seed, index)."""
    rng = replicate_rng(scenario.seed, replicate_index)
    z = _replicate_noise(scenario, rng)
    truth = scenario.truth_is_null()
    z[~truth] += scenario.effect
    return z, truth


def _study_counts(p_sorted, null_sorted, spec):
    """Batched rejection counts (r, v) for one procedure over sorted rows."""
    n = p_sorted.shape[1]
    reps = p_sorted.shape[0]
    ranks = np.arange(1, n + 1, dtype=np.float64)
    q = spec.q
    if spec.name in ("bh", "by", "bonferroni"):
        if spec.name == "bonferroni":
            unit = np.full(n, 1.0 / n)
            level = q
        else:
            unit = ranks / n
            level = q
            if spec.name == "by":
                level = q / math.fsum(1.0 / i for i in range(1, n + 1))
        counts = _backend.step_up_counts(p_sorted, unit, np.full(reps, level))
    elif spec.name == "adaptive_step_down":
        n0 = n + 1.0 - ranks * (1.0 - q)
        counts = _backend.step_down_counts(p_sorted, q * ranks / n0)
    else:
        q_star = q / (1.0 + q)
        unit = ranks / n
        r1 = _backend.step_up_counts(p_sorted, unit, np.full(reps, q_star))
        if spec.bound_variant == "canonical":
            n0_hat = (n - r1).astype(np.float64)
        else:
            n0_hat = n - r1 * (1.0 - q)
        interior = (r1 > 0) & (r1 < n)
        levels2 = np.where(interior, q_star * n / np.maximum(n0_hat, 1e-12), 0.0)
        counts = _backend.step_up_counts(p_sorted, unit, levels2)
        counts = np.where(r1 == 0, 0, counts)
        counts = np.where(r1 == n, n, counts)
    v = _backend.true_null_rejections(null_sorted, counts)
    return counts, v


def _chunk_size(n):
    return max(16, min(256, 2_000_000 // max(n, 1)))


def _run_chunks(scenario, worker, workers):
    """Run `worker(start, count)` over replicate chunks, in index order."""
    total = scenario.replicates
    size = _chunk_size(scenario.n)
    spans = [(s, min(size, total - s)) for s in range(0, total, size)]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda span: worker(*span), spans))
    return [worker(*span) for span in spans]


def _study_chunk(scenario, start, count):
    n = scenario.n
    truth = scenario.truth_is_null()
    z = np.empty((count, n))
    for i in range(count):
        rng = replicate_rng(scenario.seed, start + i)
        z[i] = _replicate_noise(scenario, rng)
    z[:, ~truth] += scenario.effect
    p = p_from_z(z, scenario.sidedness)
    order = np.argsort(p, axis=1, kind="stable")
    p_sorted = np.take_along_axis(p, order, axis=1)
    null_sorted = truth[order].astype(np.uint8)
    try:
        counts, v = _study_counts(p_sorted, null_sorted, scenario.procedure)
    except Exception as exc:
        raise RuntimeError(
            f"procedure failed on replicates {start}..{start + count - 1}: {exc}"
        ) from exc
    return counts, v


@dataclass(frozen=True, eq=False)
class StudyReport:
    """Aggregated procedure performance over a scenario."""

    scenario: Scenario
    scenario_hash: str
    rates: ErrorRateReport
    tdp_mean: float
    outcomes: tuple | None = field(default=None, repr=False)

    def to_dict(self):
        d = {
            "kind": "study",
            "scenario": self.scenario.to_dict(),
            "scenario_hash": self.scenario_hash,
            "rates": self.rates.to_dict(),
            "tdp_mean": self.tdp_mean,
            "seed": self.scenario.seed,
        }
        return d

    def summary(self):
        r = self.rates
        spec = self.scenario.procedure
        lines = [
            f"study: {spec.name} at q={spec.q} over {r.n_replicates} replicates",
            f"fdr_hat={r.fdr_hat:.6f}  pfdr_hat="
            + (f"{r.pfdr_hat:.6f}" if r.pfdr_hat is not None else "undefined")
            + "  fdr_cap_hat="
            + (f"{r.fdr_cap_hat:.6f}" if r.fdr_cap_hat is not None else "undefined"),
            f"fwer_hat={r.fwer_hat:.6f}  mean_r={r.mean_r:.4f}  tdp_mean={self.tdp_mean:.6f}",
        ]
        return lines


def run_study(scenario, workers=1, keep_outcomes=False):
    """Replicate a procedure scenario and aggregate its error rates.

    Each replicate: generate z, convert to p per sidedness, run the
    configured procedure, score against truth.  keep_outcomes attaches
    the per-replicate (v, r) pairs for downstream analysis.
    """
    if scenario.procedure is None:
        raise ValidationError("a study scenario needs a procedure spec")
    pieces = _run_chunks(scenario, lambda s, c: _study_chunk(scenario, s, c), workers)
    counts = np.concatenate([piece[0] for piece in pieces])
    v = np.concatenate([piece[1] for piece in pieces])
    outcomes = [ReplicateOutcome(int(vi), int(ri)) for vi, ri in zip(v, counts)]
    rates = aggregate(outcomes)
    n1 = scenario.n - scenario.n_null
    if n1 > 0:
        tdp_mean = math.fsum((r - w) / n1 for w, r in zip(v, counts)) / len(outcomes)
    else:
        tdp_mean = 0.0
    return StudyReport(
        scenario=scenario,
        scenario_hash=scenario_hash({"kind": "study", "scenario": scenario.to_dict()}),
        rates=rates,
        tdp_mean=tdp_mean,
        outcomes=tuple(outcomes) if keep_outcomes else None,
    )


@dataclass(frozen=True, eq=False)
class FixedThresholdReport:
    """Error rates for a fixed z cutoff, with identity-chain gaps."""

    scenario: Scenario
    scenario_hash: str
    z_threshold: float
    rates: ErrorRateReport
    gap_fdr_pfdr: float | None
    gap_pfdr_fdr_cap: float | None
    fdp_variance: float | None
    tdp_mean: float
    fdp_values: tuple | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "kind": "fixed_threshold",
            "scenario": self.scenario.to_dict(),
            "scenario_hash": self.scenario_hash,
            "z_threshold": self.z_threshold,
            "rates": self.rates.to_dict(),
            "gap_fdr_pfdr": self.gap_fdr_pfdr,
            "gap_pfdr_fdr_cap": self.gap_pfdr_fdr_cap,
            "fdp_variance": self.fdp_variance,
            "tdp_mean": self.tdp_mean,
            "seed": self.scenario.seed,
        }

    def summary(self):
        r = self.rates
        gap1 = "undefined" if self.gap_fdr_pfdr is None else f"{self.gap_fdr_pfdr:.6f}"
        gap2 = (
            "undefined" if self.gap_pfdr_fdr_cap is None else f"{self.gap_pfdr_fdr_cap:.6f}"
        )
        fdpv = "undefined" if self.fdp_variance is None else f"{self.fdp_variance:.6g}"
        return [
            f"fixed threshold z={self.z_threshold} over {r.n_replicates} replicates",
            f"fdr_hat={r.fdr_hat:.6f}  gap(FDR,pFDR)={gap1}  gap(pFDR,Fdr)={gap2}",
            f"fdp_variance={fdpv}  fwer_hat={r.fwer_hat:.6f}",
        ]


def _threshold_chunk(scenario, z_threshold, start, count):
    truth = scenario.truth_is_null()
    n_null = int(truth.sum())
    v = np.empty(count, dtype=np.int64)
    r = np.empty(count, dtype=np.int64)
    for i in range(count):
        rng = replicate_rng(scenario.seed, start + i)
        z = _replicate_noise(scenario, rng)
        z[~truth] += scenario.effect
        if scenario.sidedness == "two_sided":
            hits = np.abs(z) > z_threshold
        else:
            hits = z > z_threshold
        v[i] = int(hits[:n_null].sum())
        r[i] = int(hits.sum())
    return v, r


def fixed_threshold_study(scenario, z_threshold, workers=1, keep_fdp=False):
    """Reject everything beyond a fixed z cutoff, replicate, aggregate.

    The cutoff applies per sidedness: z > threshold one-sided,
    |z| > threshold two-sided.  Reports the identity-chain gaps and the
    replicate-level variance of the false discovery proportion, the
    two quantities fixed-threshold studies exist to measure.
    """
    z_threshold = float(z_threshold)
    if not math.isfinite(z_threshold):
        raise ValidationError("z threshold must be finite")
    pieces = _run_chunks(
        scenario,
        lambda s, c: _threshold_chunk(scenario, z_threshold, s, c),
        workers,
    )
    v = np.concatenate([piece[0] for piece in pieces])
    r = np.concatenate([piece[1] for piece in pieces])
    outcomes = [ReplicateOutcome(int(vi), int(ri)) for vi, ri in zip(v, r)]
    rates = aggregate(outcomes)
    if rates.pfdr_hat is None:
        gaps = (None, None)
    else:
        gaps = (
            abs(rates.fdr_hat - rates.pfdr_hat),
            abs(rates.pfdr_hat - rates.fdr_cap_hat),
        )
    fdps = [o.fdp for o in outcomes]
    if len(fdps) > 1:
        mean = rates.fdr_hat
        fdp_var = math.fsum((f - mean) ** 2 for f in fdps) / (len(fdps) - 1)
    else:
        fdp_var = None
    n1 = scenario.n - scenario.n_null
    if n1 > 0:
        tdp_mean = math.fsum((ri - vi) / n1 for vi, ri in zip(v, r)) / len(outcomes)
    else:
        tdp_mean = 0.0
    return FixedThresholdReport(
        scenario=scenario,
        scenario_hash=scenario_hash(
            {
                "kind": "fixed_threshold",
                "scenario": scenario.to_dict(),
                "z_threshold": z_threshold,
            }
        ),
        z_threshold=z_threshold,
        rates=rates,
        gap_fdr_pfdr=gaps[0],
        gap_pfdr_fdr_cap=gaps[1],
        fdp_variance=fdp_var,
        tdp_mean=tdp_mean,
        fdp_values=tuple(fdps) if keep_fdp else None,
    )


@dataclass(frozen=True, eq=False)
class FilterRunResult:
    """One filter-then-test dataset: both p-value sets and diagnostics."""

    p_pre: np.ndarray
    p_post: np.ndarray
    kept: np.ndarray
    pre: object
    post: object


def filter_then_test(scenario, filter_spec, log_sd=1.0, run_index=0):
    """Generate group samples, test all hypotheses, retest after filtering.

    Data are expression-like: per hypothesis, two groups of
    samples_per_group log-normal samples (normal on the log scale with
    spread log_sd, group-two means shifted by effect for non-nulls).
    Tests are two-sample z-statistics on the log scale with known
    spread, so pre-filter null p-values are exactly uniform.  The
    filter statistic is computed on the combined raw-scale samples, as
    variation filters are in practice, which is precisely why it leaks
    into the test: raw-scale spread and log-scale mean move together.

    Returns both p-value vectors and a diagnostics pair over the test
    statistics.  Raises EmptyFilterError when nothing survives.
    """
    if not isinstance(filter_spec, FilterSpec):
        raise ValidationError("filter_then_test expects a FilterSpec")
    log_sd = float(log_sd)
    if not (math.isfinite(log_sd) and log_sd > 0.0):
        raise ValidationError(f"log_sd must be positive, got {log_sd}")
    n = scenario.n
    m = filter_spec.samples_per_group
    rng = replicate_rng(scenario.seed, run_index)
    logs = rng.standard_normal((n, 2 * m)) * log_sd
    truth = scenario.truth_is_null()
    logs[~truth, m:] += scenario.effect
    raw = np.exp(logs)
    group_a = logs[:, :m].mean(axis=1)
    group_b = logs[:, m:].mean(axis=1)
    z = (group_b - group_a) / (log_sd * math.sqrt(2.0 / m))
    p = p_from_z(z, scenario.sidedness)
    if filter_spec.statistic == "sample_sd":
        stat = raw.std(axis=1, ddof=1)
    else:
        stat = raw.max(axis=1) / raw.min(axis=1)
    if filter_spec.threshold_kind == "quantile":
        cut = float(np.quantile(stat, filter_spec.threshold))
    else:
        cut = filter_spec.threshold
    keep = stat > cut
    if not keep.any():
        raise EmptyFilterError(
            f"filter at {filter_spec.threshold} ({filter_spec.threshold_kind}) "
            "removed every hypothesis"
        )
    return FilterRunResult(
        p_pre=p,
        p_post=p[keep],
        kept=np.nonzero(keep)[0],
        pre=diagnose_null(z),
        post=diagnose_null(z[keep]),
    )


@dataclass(frozen=True, eq=False)
class FilterStudyReport:
    """Repeated filter-then-test runs scored by KS uniformity at 5%."""

    scenario: Scenario
    scenario_hash: str
    filter_spec: FilterSpec
    log_sd: float
    runs: int
    pre_pass: int
    post_fail: int
    joint: int
    first_pre: object
    first_post: object
    n_kept_first: int

    def to_dict(self):
        def diag_dict(d):
            return {
                "n": d.n,
                "central_fraction": d.central_fraction,
                "expected_central_fraction": d.expected_central_fraction,
                "dip_statistic": d.dip_statistic,
                "ks_statistic": d.ks_statistic,
                "ks_pvalue": d.ks_pvalue,
                "ks_critical_5pct": d.ks_critical_5pct,
            }

        return {
            "kind": "filter",
            "scenario": self.scenario.to_dict(),
            "scenario_hash": self.scenario_hash,
            "filter": self.filter_spec.to_dict(),
            "log_sd": self.log_sd,
            "ks_alpha": _KS_ALPHA,
            "runs": self.runs,
            "pre_pass": self.pre_pass,
            "post_fail": self.post_fail,
            "joint": self.joint,
            "pre_pass_rate": self.pre_pass / self.runs,
            "post_fail_rate": self.post_fail / self.runs,
            "joint_rate": self.joint / self.runs,
            "first_run": {
                "pre": diag_dict(self.first_pre),
                "post": diag_dict(self.first_post),
                "n_kept": self.n_kept_first,
            },
            "seed": self.scenario.seed,
        }

    def summary(self):
        return [
            f"filter study: {self.runs} runs, statistic={self.filter_spec.statistic} "
            f"at {self.filter_spec.threshold} ({self.filter_spec.threshold_kind})",
            f"pre-filter uniformity passes: {self.pre_pass}/{self.runs}",
            f"post-filter uniformity failures: {self.post_fail}/{self.runs}",
            f"joint (pre passes and post fails): {self.joint}/{self.runs}",
        ]


def run_filter_study(scenario, filter_spec, log_sd=1.0):
    """Repeat filter_then_test scenario.replicates times and tally KS calls.

    A run counts as distorted when the pre-filter p-values pass KS
    uniformity at 5% and the post-filter p-values fail it.
    """
    pre_pass = post_fail = joint = 0
    first = None
    for run_index in range(scenario.replicates):
        result = filter_then_test(scenario, filter_spec, log_sd, run_index)
        if first is None:
            first = result
        ok_pre = result.pre.ks_pvalue >= _KS_ALPHA
        bad_post = result.post.ks_pvalue < _KS_ALPHA
        pre_pass += ok_pre
        post_fail += bad_post
        joint += ok_pre and bad_post
    return FilterStudyReport(
        scenario=scenario,
        scenario_hash=scenario_hash(
            {
                "kind": "filter",
                "scenario": scenario.to_dict(),
                "filter": filter_spec.to_dict(),
                "log_sd": log_sd,
            }
        ),
        filter_spec=filter_spec,
        log_sd=log_sd,
        runs=scenario.replicates,
        pre_pass=int(pre_pass),
        post_fail=int(post_fail),
        joint=int(joint),
        first_pre=first.pre,
        first_post=first.post,
        n_kept_first=int(first.kept.size),
    )


@dataclass(frozen=True, eq=False)
class LocalFdrStudyReport:
    """Estimated-vs-exact local fdr agreement on a mixture sample."""

    scenario_hash: str
    model: TwoGroupsModel
    draws: int
    seed: int
    p0_plug: float
    grid_lo: float
    grid_hi: float
    grid_points: int
    max_abs_error: float
    mean_abs_error: float
    identity_probes: tuple
    identity_max_error: float

    def to_dict(self):
        return {
            "kind": "local_fdr",
            "scenario_hash": self.scenario_hash,
            "model": {
                "p0": self.model.p0,
                "null": {"mean": self.model.null.mean, "sd": self.model.null.sd},
                "alternative": {
                    "mean": self.model.alternative.mean,
                    "sd": self.model.alternative.sd,
                },
            },
            "draws": self.draws,
            "seed": self.seed,
            "p0_plug": self.p0_plug,
            "grid": {"lo": self.grid_lo, "hi": self.grid_hi, "points": self.grid_points},
            "max_abs_error": self.max_abs_error,
            "mean_abs_error": self.mean_abs_error,
            "identity_probes": list(self.identity_probes),
            "identity_max_error": self.identity_max_error,
        }

    def summary(self):
        return [
            f"local fdr fit: {self.draws} draws, p0_plug={self.p0_plug}",
            f"max |estimate - exact| on [{self.grid_lo}, {self.grid_hi}]: "
            f"{self.max_abs_error:.6f}",
            f"tail identity max quadrature error: {self.identity_max_error:.3g}",
        ]


def draw_mixture(model, draws, seed):
    """Sample z-values from a two-groups model, nulls first."""
    if draws < 1:
        raise ValidationError(f"need draws >= 1, got {draws}")
    rng = replicate_rng(seed, 0)
    xi = rng.standard_normal(draws)
    n_null = int(round(model.p0 * draws))
    z = np.empty(draws)
    z[:n_null] = model.null.mean + model.null.sd * xi[:n_null]
    z[n_null:] = model.alternative.mean + model.alternative.sd * xi[n_null:]
    return z


def local_fdr_study(
    model,
    draws,
    seed,
    p0_plug=None,
    grid_lo=-4.0,
    grid_hi=4.0,
    grid_points=161,
    identity_probes=(0.0, 1.0, 2.0, 3.0),
):
    """Fit the local fdr on simulated mixture draws and score it.

    Compares the estimate against the exact curve on a grid, and checks
    the averaging identity Fdr(z) = E[fdr(Z) | Z >= z] on the exact
    model by numeric quadrature at the probe points.
    """
    from scipy.integrate import quad

    z = draw_mixture(model, draws, seed)
    plug = model.p0 if p0_plug is None else float(p0_plug)
    grid = np.linspace(grid_lo, grid_hi, grid_points)
    curve = estimate_local_fdr(z, plug, null=model.null, grid=grid)
    exact = local_fdr_exact(model, grid)
    errors = np.abs(curve.local_fdr - exact)

    def _weighted_fdr(u):
        # fdr * f underflows to exactly 0 with f; skip the ratio there.
        fz = model.mixture_pdf(float(u))
        if fz == 0.0:
            return 0.0
        return local_fdr_exact(model, float(u)) * fz

    identity_errors = []
    for probe in identity_probes:
        numerator, _ = quad(_weighted_fdr, probe, np.inf)
        lhs = tail_fdr_exact(model, probe)
        identity_errors.append(abs(lhs - numerator / model.mixture_sf(probe)))

    config = {
        "kind": "local_fdr",
        "model": {
            "p0": model.p0,
            "null": {"mean": model.null.mean, "sd": model.null.sd},
            "alternative": {
                "mean": model.alternative.mean,
                "sd": model.alternative.sd,
            },
        },
        "draws": int(draws),
        "seed": int(seed),
        "p0_plug": plug,
        "grid": {"lo": grid_lo, "hi": grid_hi, "points": grid_points},
        "identity_probes": list(identity_probes),
    }
    return LocalFdrStudyReport(
        scenario_hash=scenario_hash(config),
        model=model,
        draws=int(draws),
        seed=int(seed),
        p0_plug=plug,
        grid_lo=float(grid_lo),
        grid_hi=float(grid_hi),
        grid_points=int(grid_points),
        max_abs_error=float(errors.max()),
        mean_abs_error=float(errors.mean()),
        identity_probes=tuple(float(p) for p in identity_probes),
        identity_max_error=float(max(identity_errors)),
    )


def scenario_hash(config):
    """Provenance hash: sha256 of the canonical config serialization."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_run_config(path):
    """Parse a scenario file into a run-config dict."""
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scenario file {path} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ValidationError("scenario file must hold a JSON object")
    return config


def execute_run(config, workers=1):
    """Dispatch a run-config dict to the matching study.

    Kinds: study, fixed_threshold, filter, fcr, sparse_risk, local_fdr.
    Returns the report object; all reports expose to_dict() and
    summary().
    """
    from .selective import SparseMeansScenario, fcr_study, threshold_risk_study

    kind = config.get("kind")
    if kind == "study":
        scenario = Scenario.from_dict(config.get("scenario", {}))
        return run_study(scenario, workers=workers)
    if kind == "fixed_threshold":
        scenario = Scenario.from_dict(config.get("scenario", {}))
        if "z_threshold" not in config:
            raise ValidationError("fixed_threshold config needs z_threshold")
        return fixed_threshold_study(scenario, config["z_threshold"], workers=workers)
    if kind == "filter":
        scenario = Scenario.from_dict(config.get("scenario", {}))
        spec = FilterSpec.from_dict(config.get("filter", {}))
        return run_filter_study(scenario, spec, log_sd=config.get("log_sd", 1.0))
    if kind in ("fcr", "sparse_risk"):
        means = config.get("means", {})
        extra = set(means) - {"n", "n_signals", "signal", "replicates", "seed"}
        if extra:
            raise ValidationError(f"unknown means fields: {sorted(extra)}")
        try:
            scenario = SparseMeansScenario(
                n=int(means["n"]),
                n_signals=int(means["n_signals"]),
                signal=float(means["signal"]),
                replicates=int(means["replicates"]),
                seed=int(means["seed"]),
            )
        except KeyError as exc:
            raise ValidationError(f"means config is missing {exc}") from exc
        q = config.get("q")
        if q is None:
            raise ValidationError(f"{kind} config needs q")
        if kind == "fcr":
            return _WithConfigHash(fcr_study(scenario, q), config)
        return _WithConfigHash(threshold_risk_study(scenario, q), config)
    if kind == "local_fdr":
        model_cfg = config.get("model", {})
        model = TwoGroupsModel(
            p0=float(model_cfg.get("p0", 0.0)),
            null=NormalSpec(**model_cfg.get("null", {})),
            alternative=NormalSpec(**model_cfg.get("alternative", {})),
        )
        grid_cfg = config.get("grid", {})
        return local_fdr_study(
            model,
            draws=int(config.get("draws", 0)),
            seed=int(config.get("seed", 0)),
            p0_plug=config.get("p0_plug"),
            grid_lo=float(grid_cfg.get("lo", -4.0)),
            grid_hi=float(grid_cfg.get("hi", 4.0)),
            grid_points=int(grid_cfg.get("points", 161)),
            identity_probes=tuple(config.get("identity_probes", (0.0, 1.0, 2.0, 3.0))),
        )
    raise ValidationError(
        f"unknown scenario kind {kind!r}; expected study, fixed_threshold, "
        "filter, fcr, sparse_risk, or local_fdr"
    )


class _WithConfigHash:
    """Wrap a selective-study report with scenario provenance."""

    def __init__(self, report, config):
        self._report = report
        self.scenario_hash = scenario_hash(config)
        self.kind = config["kind"]

    def __getattr__(self, name):
        return getattr(self._report, name)

    def to_dict(self):
        out = {"kind": self.kind, "scenario_hash": self.scenario_hash}
        out.update(self._report.to_dict())
        return out

    def summary(self):
        d = self._report.to_dict()
        if self.kind == "fcr":
            return [
                f"fcr study: {d['replicates']} replicates, q={d['q']}",
                f"fcr_hat={d['fcr_hat']:.6f}  mean_selected={d['mean_selected']:.3f}",
            ]
        return [
            f"sparse risk study: {d['replicates']} replicates, q={d['q']}",
            f"mse_fdr={d['mse_fdr']:.6f}  mse_universal={d['mse_universal']:.6f}  "
            f"mse_zero={d['mse_zero']:.6f}",
        ]
