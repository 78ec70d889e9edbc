"""Two-groups mixture model: exact and estimated fdr curves.

The model says a z-value is null with probability p0 and comes from an
alternative density otherwise, giving the mixture f = p0 f0 + p1 f1.
Local fdr at z is p0 f0(z) / f(z); tail Fdr replaces densities with
tail areas.  The exact functions take a fully specified model; the
estimators work from a z-value sample plus a null-fraction estimate.

The local fdr estimator is an order-statistic slope method.  Writing
y_(i) = F0(z_(i)), the slope of the curve y against empirical quantile
rank i/n estimates f0(z)/f(z) at the window center, so p0 times that
slope estimates the local fdr directly.  Window width is picked per
grid point by widening through a geometric ladder until a new window
disagrees with the accepted ones by more than its noise allowance,
which keeps windows wide in flat regions and narrow where the curve
bends.  A two-width Richardson step removes most of the remaining
large-window bias.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import kstest, kstwobign, norm

from .errors import DomainError, ValidationError
from .procedures import PValueSet

__all__ = [
    "NormalSpec",
    "TwoGroupsModel",
    "FdrCurve",
    "NullDiagnostics",
    "local_fdr_exact",
    "tail_fdr_exact",
    "estimate_local_fdr",
    "estimate_p0_lambda",
    "p0_bound_two_stage",
    "fit_empirical_null",
    "diagnose_null",
    "p_from_z",
]


@dataclass(frozen=True)
class NormalSpec:
    """Normal distribution with explicit location and scale."""

    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.sd)):
            raise ValidationError("normal parameters must be finite")
        if self.sd <= 0.0:
            raise ValidationError(f"sd must be positive, got {self.sd}")

    def pdf(self, z):
        return norm.pdf(z, loc=self.mean, scale=self.sd)

    def cdf(self, z):
        return norm.cdf(z, loc=self.mean, scale=self.sd)

    def sf(self, z):
        return norm.sf(z, loc=self.mean, scale=self.sd)


@dataclass(frozen=True)
class TwoGroupsModel:
    """Mixture p0 * null + (1 - p0) * alternative."""

    p0: float
    null: NormalSpec
    alternative: NormalSpec

    def __post_init__(self):
        if not 0.0 <= self.p0 <= 1.0:
            raise ValidationError(f"p0 must lie in [0, 1], got {self.p0}")

    def mixture_pdf(self, z):
        return self.p0 * self.null.pdf(z) + (1.0 - self.p0) * self.alternative.pdf(z)

    def mixture_cdf(self, z):
        return self.p0 * self.null.cdf(z) + (1.0 - self.p0) * self.alternative.cdf(z)

    def mixture_sf(self, z):
        return self.p0 * self.null.sf(z) + (1.0 - self.p0) * self.alternative.sf(z)


@dataclass(frozen=True, eq=False)
class FdrCurve:
    """Estimated fdr curves on a grid.

    local_fdr is clamped to [0, 1]; raw_ratio keeps the unclamped
    estimate for auditing.  tail_fdr is the cumulative version for the
    stated tail, also clamped.
    """

    grid: np.ndarray
    local_fdr: np.ndarray
    raw_ratio: np.ndarray
    tail_fdr: np.ndarray
    tail: str
    p0: float
    null: NormalSpec
    n_values: int

    def interp_local(self, z):
        return np.interp(z, self.grid, self.local_fdr)

    def interp_tail(self, z):
        return np.interp(z, self.grid, self.tail_fdr)


@dataclass(frozen=True)
class NullDiagnostics:
    """Agreement checks between a z-value sample and a claimed null.

    central_fraction is the share of values in [-1, 1]; dip_statistic
    is how far that falls short of the claimed null's probability of
    the same band.  The KS entries test standardized two-sided p-values
    against uniformity.
    """

    n: int
    central_fraction: float
    expected_central_fraction: float
    dip_statistic: float
    ks_statistic: float
    ks_pvalue: float
    ks_critical_5pct: float
    null: NormalSpec | None = None


def _as_z(z, minimum=1):
    arr = np.asarray(z, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"z-values must be one-dimensional, got shape {arr.shape}")
    if arr.size < minimum:
        raise ValidationError(f"need at least {minimum} z-values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("z-values must be finite")
    return arr


def local_fdr_exact(model, z):
    """Exact local fdr p0 f0(z) / f(z) under a fully specified model.

    Raises DomainError where the mixture density underflows to zero.
    """
    scalar = np.isscalar(z)
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    f = model.mixture_pdf(z)
    if np.any(f <= 0.0):
        bad = z[f <= 0.0][0]
        raise DomainError(f"mixture density is zero at z={bad}")
    out = model.p0 * model.null.pdf(z) / f
    return float(out[0]) if scalar else out


def tail_fdr_exact(model, z, tail="right"):
    """Exact tail Fdr: null share of the mixture mass beyond z.

    tail="right" uses P(Z >= z), tail="left" uses P(Z <= z).  Raises
    DomainError where the mixture tail mass is zero.
    """
    if tail not in ("right", "left"):
        raise ValidationError(f"tail must be 'right' or 'left', got {tail!r}")
    scalar = np.isscalar(z)
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if tail == "right":
        null_mass = model.null.sf(z)
        mix_mass = model.mixture_sf(z)
    else:
        null_mass = model.null.cdf(z)
        mix_mass = model.mixture_cdf(z)
    if np.any(mix_mass <= 0.0):
        bad = z[mix_mass <= 0.0][0]
        raise DomainError(f"mixture tail mass is zero at z={bad}")
    out = model.p0 * null_mass / mix_mass
    return float(out[0]) if scalar else out


def _window_ladder(n):
    base = max(25, n // 32)
    rungs = []
    width = float(base)
    while width <= n // 2:
        rungs.append(int(width))
        width *= 1.5
    if not rungs:
        rungs.append(max(2, n // 2))
    return rungs


def estimate_local_fdr(z, p0, null=None, grid=None, grid_size=512, tail="right"):
    """Estimate the local fdr curve from a z-value sample.

    z         : at least 100 finite z-values.
    p0        : null fraction to plug into the numerator.
    null      : NormalSpec for the null component, standard by default.
    grid      : evaluation points; defaults to grid_size points spanning
                the data range padded by one unit on each side.
    tail      : which cumulative Fdr to attach to the curve.

    Returns an FdrCurve.  The local estimate at a grid point is the
    slope of F0(z_(i)) against i/n over a rank window centered there,
    scaled by p0, with the window chosen per point as described in the
    module docstring.
    """
    z = _as_z(z, minimum=100)
    if not 0.0 <= p0 <= 1.0:
        raise ValidationError(f"p0 must lie in [0, 1], got {p0}")
    if null is None:
        null = NormalSpec()
    if tail not in ("right", "left"):
        raise ValidationError(f"tail must be 'right' or 'left', got {tail!r}")
    n = z.size
    zs = np.sort(z)
    if grid is None:
        grid = np.linspace(zs[0] - 1.0, zs[-1] + 1.0, int(grid_size))
    else:
        grid = np.asarray(grid, dtype=np.float64)
        if grid.ndim != 1 or grid.size == 0:
            raise ValidationError("grid must be a non-empty vector")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise ValidationError("grid must be strictly increasing")
    y = null.cdf(zs)
    rungs = _window_ladder(n)

    def slope(center, half_width):
        lo = max(0, center - half_width)
        hi = min(n - 1, center + half_width)
        span = hi - lo
        if span < 2:
            return None, 0
        return p0 * (y[hi] - y[lo]) / (span / n), span

    raw = np.empty(grid.size)
    centers = np.searchsorted(zs, grid)
    for j, center in enumerate(centers):
        accepted = []
        for half_width in rungs:
            est, span = slope(center, half_width)
            if est is None:
                continue
            wide, wide_span = slope(center, 2 * half_width)
            if wide is not None and wide_span > span:
                # two-width Richardson step; slope bias is O(width^2)
                candidate = est + (est - wide) / 3.0
            else:
                candidate = est
            allowance = 1.25 * max(est, 0.05) / math.sqrt(span)
            if all(
                abs(candidate - prev) <= 2.2 * prev_sd
                for prev, prev_sd in accepted
            ):
                accepted.append((candidate, allowance))
            else:
                break
        raw[j] = accepted[-1][0] if accepted else 1.0

    local = np.clip(raw, 0.0, 1.0)

    if tail == "right":
        beyond = n - np.searchsorted(zs, grid, side="left")
        null_mass = null.sf(grid)
        scan = range(grid.size)
    else:
        beyond = np.searchsorted(zs, grid, side="right")
        null_mass = null.cdf(grid)
        scan = range(grid.size - 1, -1, -1)
    tail_curve = np.empty(grid.size)
    last = 1.0
    for j in scan:
        if beyond[j] > 0:
            last = min(max(p0 * null_mass[j] / (beyond[j] / n), 0.0), 1.0)
        tail_curve[j] = last

    return FdrCurve(
        grid=grid,
        local_fdr=local,
        raw_ratio=raw,
        tail_fdr=tail_curve,
        tail=tail,
        p0=float(p0),
        null=null,
        n_values=n,
    )


def estimate_p0_lambda(p, lam=0.5):
    """Null-fraction estimate from the p-value tail beyond lambda.

    Counts p-values above lam, scales by n (1 - lam), caps at one.
    """
    if isinstance(p, PValueSet):
        p = p.values
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("need a non-empty p-value vector")
    if np.any(~np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
        raise ValidationError("p-values must be finite and in [0, 1]")
    if not 0.0 < lam < 1.0:
        raise ValidationError(f"lambda must lie in (0, 1), got {lam}")
    count = int(np.sum(p > lam))
    return min(1.0, count / (p.size * (1.0 - lam)))


def p0_bound_two_stage(n, r1, q):
    """Null-count bound n - r1 (1 - q) implied by a first-stage count."""
    if n < 0 or r1 < 0 or r1 > n:
        raise ValidationError(f"need 0 <= r1 <= n, got n={n}, r1={r1}")
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ValidationError(f"level q must lie strictly inside (0, 1), got {q}")
    return n - r1 * (1.0 - q)


def fit_empirical_null(z, central_range=(0.25, 0.75)):
    """Fit a normal null to the center of a z-value sample.

    Location is the midpoint quantile of central_range; scale is the
    interquantile distance divided by its standard-normal counterpart.
    Only the slice between the two quantiles influences the fit, so a
    minority of genuine signals in the tails leaves it nearly alone.
    """
    z = _as_z(z, minimum=100)
    a, b = float(central_range[0]), float(central_range[1])
    if not 0.0 < a < b < 1.0:
        raise ValidationError(f"central range must satisfy 0 < a < b < 1, got {(a, b)}")
    q_a, q_mid, q_b = np.quantile(z, [a, (a + b) / 2.0, b])
    spread = q_b - q_a
    if spread <= 0.0:
        raise ValidationError("central quantiles are degenerate; cannot fit a scale")
    scale = spread / (norm.ppf(b) - norm.ppf(a))
    return NormalSpec(mean=float(q_mid), sd=float(scale))


def diagnose_null(z, null=None):
    """Compare a z-value sample against a claimed null distribution.

    Reports the central-band fraction against its expectation and a KS
    test of the standardized two-sided p-values against uniformity.
    """
    z = _as_z(z, minimum=2)
    if null is None:
        null = NormalSpec()
    inside = np.mean((z >= -1.0) & (z <= 1.0))
    expected = float(null.cdf(1.0) - null.cdf(-1.0))
    standardized = (z - null.mean) / null.sd
    u = 2.0 * norm.sf(np.abs(standardized))
    ks = kstest(u, "uniform")
    critical = float(kstwobign.ppf(0.95)) / math.sqrt(z.size)
    return NullDiagnostics(
        n=int(z.size),
        central_fraction=float(inside),
        expected_central_fraction=expected,
        dip_statistic=expected - float(inside),
        ks_statistic=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
        ks_critical_5pct=critical,
        null=null,
    )


def p_from_z(z, sidedness="two_sided"):
    """Convert z-values to p-values.

    "one_sided" tests against the right tail; "two_sided" doubles the
    smaller tail.
    """
    z = np.asarray(z, dtype=np.float64)
    if sidedness == "one_sided":
        return norm.sf(z)
    if sidedness == "two_sided":
        return 2.0 * norm.sf(np.abs(z))
    raise ValidationError(
        f"sidedness must be 'one_sided' or 'two_sided', got {sidedness!r}"
    )
