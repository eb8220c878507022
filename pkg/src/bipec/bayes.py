"""Bayesian change-point scan via conjugate closed-form marginal likelihoods.

For each candidate split t the scan compares two hypotheses about a data
window: a single generating distribution throughout versus distinct
parameters before and after t.  Both marginal likelihoods integrate the
parameters out in closed form (Poisson rate under a Gamma prior, or Gaussian
mean/variance under a Normal-Inverse-Gamma prior), and their log ratio is the
log Bayes factor.  Positive values favor a change at t; values above the
configured log-odds threshold become candidates, while sub-threshold peaks
are recorded separately so a later stage (or a lowered threshold) can revisit
them.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.special import gammaln

from .data import TimeSeries
from .errors import ArgumentError, DomainError, UnusableInputError

LOG_2PI = math.log(2.0 * math.pi)


class Distribution(str, Enum):
    POISSON = "poisson"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class PriorSpec:
    """Conjugate prior hyperparameters for the segment models.

    Poisson observations use a Gamma(shape, rate) prior on the rate.
    Gaussian observations use a Normal-Inverse-Gamma prior: mean ~
    Normal(mean_prior, variance / precision_scale), variance ~
    InverseGamma(ig_shape, ig_scale).  A ``gaussian_mean_prior`` of None is
    resolved to the mean of the data handed to the top-level entry point, so
    the prior is weakly centered without hand-tuning per metric.
    """

    distribution: Distribution = Distribution.GAUSSIAN
    poisson_gamma_shape: float = 1.0
    poisson_gamma_rate: float = 1.0
    gaussian_mean_prior: float | None = None
    gaussian_precision_scale: float = 1.0
    gaussian_ig_shape: float = 1.0
    gaussian_ig_scale: float = 1.0

    def __post_init__(self) -> None:
        for name in (
            "poisson_gamma_shape",
            "poisson_gamma_rate",
            "gaussian_precision_scale",
            "gaussian_ig_shape",
            "gaussian_ig_scale",
        ):
            if getattr(self, name) <= 0:
                raise ArgumentError(f"{name} must be strictly positive")

    def resolved_for(self, data: np.ndarray) -> "PriorSpec":
        """Pin a data-derived mean prior so both hypotheses share it."""
        if self.distribution is Distribution.GAUSSIAN and self.gaussian_mean_prior is None:
            return replace(self, gaussian_mean_prior=float(np.mean(data)))
        return self


class CandidateStatus(str, Enum):
    CANDIDATE = "candidate"
    NO_SPLIT_PEAK = "no_split_peak"


@dataclass(frozen=True)
class BayesCandidate:
    """A candidate split with its evidence and segment statistics."""

    series_id: str
    split_index: int
    log_odds: float
    window_start: int
    window_end: int
    pre_mean: float
    pre_std: float
    post_mean: float
    post_std: float
    status: CandidateStatus

    def __post_init__(self) -> None:
        if not self.window_start < self.split_index < self.window_end:
            raise ArgumentError(
                f"split {self.split_index} outside window "
                f"({self.window_start}, {self.window_end})"
            )
        if not math.isfinite(self.log_odds):
            raise ArgumentError(f"log_odds must be finite, got {self.log_odds}")


@dataclass(frozen=True)
class BayesScanConfig:
    prior: PriorSpec = PriorSpec()
    log_odds_threshold: float = 5.0
    window_size: int | None = None
    stride: int | None = None
    refine: bool = True

    def __post_init__(self) -> None:
        if self.window_size is not None:
            if self.window_size < 4:
                raise ArgumentError(f"window_size must be >= 4, got {self.window_size}")
            if self.stride is not None and self.stride > self.window_size:
                raise ArgumentError("stride must be <= window_size")
        if self.stride is not None and self.stride < 1:
            raise ArgumentError(f"stride must be >= 1, got {self.stride}")


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant fit: one (level, stddev) per segment."""

    series_id: str
    breakpoints: tuple[int, ...]
    levels: tuple[float, ...]
    stddevs: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.breakpoints or self.breakpoints[0] != 0:
            raise ArgumentError("breakpoints must start at 0")
        if any(b >= c for b, c in zip(self.breakpoints, self.breakpoints[1:])):
            raise ArgumentError("breakpoints must be strictly ascending")
        if not len(self.breakpoints) == len(self.levels) == len(self.stddevs):
            raise ArgumentError("levels and stddevs must align with breakpoints")


# ---------------------------------------------------------------------------
# log-gamma with an integer cache
# ---------------------------------------------------------------------------

_MAX_CACHED = 1 << 22


class _LogGammaTable:
    """Lazily grown table of log Gamma at integer arguments.

    Growth swaps in a fresh array under a lock; lookups read the current
    array without locking, so concurrent scans are safe.
    """

    def __init__(self) -> None:
        self._table = np.empty(0)
        self._lock = threading.Lock()

    def lookup(self, n: int) -> float:
        table = self._table
        if n >= len(table):
            with self._lock:
                if n >= len(self._table):
                    size = min(max(n + 1, 2 * len(self._table), 1024), _MAX_CACHED + 1)
                    self._table = gammaln(np.arange(size, dtype=float))
                table = self._table
        return float(table[n])


_LGAMMA_TABLE = _LogGammaTable()


def log_gamma(n: float) -> float:
    """Natural log of Gamma(n); integer arguments are cached after first use."""
    if n <= 0:
        raise DomainError(f"log_gamma requires n > 0, got {n}")
    if float(n).is_integer() and n <= _MAX_CACHED:
        return _LGAMMA_TABLE.lookup(int(n))
    return math.lgamma(n)


# ---------------------------------------------------------------------------
# closed-form marginal likelihoods
# ---------------------------------------------------------------------------


def _check_counts(data: np.ndarray) -> None:
    if data.size and (np.any(data < 0) or np.any(data != np.floor(data))):
        raise DomainError("poisson marginal requires non-negative integer data")


def _poisson_log_marginal(m: float, total: float, sum_lgamma: float, prior: PriorSpec) -> float:
    alpha = prior.poisson_gamma_shape
    rate = prior.poisson_gamma_rate
    return (
        alpha * math.log(rate)
        - log_gamma(alpha)
        + log_gamma(alpha + total)
        - (alpha + total) * math.log(rate + m)
        - sum_lgamma
    )


def _gaussian_log_marginal(m: float, mean: float, ssd: float, prior: PriorSpec) -> float:
    mu0 = prior.gaussian_mean_prior
    kappa0 = prior.gaussian_precision_scale
    a0 = prior.gaussian_ig_shape
    b0 = prior.gaussian_ig_scale
    kappa_n = kappa0 + m
    a_n = a0 + m / 2.0
    b_n = b0 + 0.5 * ssd + kappa0 * m * (mean - mu0) ** 2 / (2.0 * kappa_n)
    return (
        -0.5 * m * LOG_2PI
        + 0.5 * (math.log(kappa0) - math.log(kappa_n))
        + a0 * math.log(b0)
        - a_n * math.log(b_n)
        + log_gamma(a_n)
        - log_gamma(a0)
    )


def log_marginal_h1(data, prior: PriorSpec) -> float:
    """Log marginal likelihood of one homogeneous segment."""
    values = np.asarray(data, dtype=float)
    if values.size == 0:
        raise ArgumentError("segment must be non-empty")
    prior = prior.resolved_for(values)
    if prior.distribution is Distribution.POISSON:
        _check_counts(values)
        return _poisson_log_marginal(
            values.size, float(values.sum()), float(gammaln(values + 1.0).sum()), prior
        )
    mean = float(values.mean())
    ssd = float(((values - mean) ** 2).sum())
    return _gaussian_log_marginal(values.size, mean, ssd, prior)


def log_marginal_h2(data, t_s: int, prior: PriorSpec) -> float:
    """Log marginal likelihood under a change at ``t_s``.

    The two segment parameters carry independent copies of the same prior,
    so the joint integral factorizes into the per-segment marginals.
    """
    values = np.asarray(data, dtype=float)
    if not 1 <= t_s <= values.size - 1:
        raise ArgumentError(f"t_s must be in [1, {values.size - 1}], got {t_s}")
    prior = prior.resolved_for(values)
    return log_marginal_h1(values[:t_s], prior) + log_marginal_h1(values[t_s:], prior)


def log_bayes_factor(data, t_s: int, prior: PriorSpec) -> float:
    """Log Bayes factor for a change at ``t_s``; positive favors a change."""
    values = np.asarray(data, dtype=float)
    prior = prior.resolved_for(values)
    return log_marginal_h2(values, t_s, prior) - log_marginal_h1(values, prior)


def _log_odds_profile(values: np.ndarray, prior: PriorSpec) -> np.ndarray:
    """Log Bayes factor at every interior split of ``values``.

    Returns an array of length ``len(values) - 1``; entry ``i`` is the log
    odds for a split at ``t = i + 1``.  Prefix sums make the whole profile
    O(n), which is what lets the scan run at every t.
    """
    m = values.size
    t = np.arange(1, m)
    if prior.distribution is Distribution.POISSON:
        _check_counts(values)
        csum = np.cumsum(values)
        clg = np.cumsum(gammaln(values + 1.0))
        alpha = prior.poisson_gamma_shape
        rate = prior.poisson_gamma_rate

        def part(count, total, sum_lg):
            return (
                alpha * math.log(rate)
                - gammaln(alpha)
                + gammaln(alpha + total)
                - (alpha + total) * np.log(rate + count)
                - sum_lg
            )

        left = part(t, csum[:-1], clg[:-1])
        right = part(m - t, csum[-1] - csum[:-1], clg[-1] - clg[:-1])
        whole = part(float(m), float(csum[-1]), float(clg[-1]))
        return left + right - whole

    mu0 = prior.gaussian_mean_prior
    kappa0 = prior.gaussian_precision_scale
    a0 = prior.gaussian_ig_shape
    b0 = prior.gaussian_ig_scale
    s1 = np.cumsum(values)
    s2 = np.cumsum(values * values)

    def part(count, linear, quadratic):
        mean = linear / count
        ssd = np.maximum(quadratic - linear * mean, 0.0)
        kappa_n = kappa0 + count
        a_n = a0 + count / 2.0
        b_n = b0 + 0.5 * ssd + kappa0 * count * (mean - mu0) ** 2 / (2.0 * kappa_n)
        return (
            -0.5 * count * LOG_2PI
            + 0.5 * (np.log(kappa0) - np.log(kappa_n))
            + a0 * np.log(b0)
            - a_n * np.log(b_n)
            + gammaln(a_n)
            - gammaln(a0)
        )

    left = part(t.astype(float), s1[:-1], s2[:-1])
    right = part((m - t).astype(float), s1[-1] - s1[:-1], s2[-1] - s2[:-1])
    whole = part(float(m), float(s1[-1]), float(s2[-1]))
    return left + right - whole


def _segment_stats(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if values.size >= 2 else 0.0
    return mean, std


def _is_local_max(profile: np.ndarray, idx: int) -> bool:
    left_ok = idx == 0 or profile[idx] >= profile[idx - 1]
    right_ok = idx == profile.size - 1 or profile[idx] >= profile[idx + 1]
    return left_ok and right_ok


def _window_candidate(
    series_id: str,
    values: np.ndarray,
    lo: int,
    hi: int,
    prior: PriorSpec,
    threshold: float,
) -> BayesCandidate | None:
    profile = _log_odds_profile(values[lo:hi], prior)
    idx = int(np.argmax(profile))
    odds = float(profile[idx])
    split = lo + idx + 1
    if odds > threshold:
        status = CandidateStatus.CANDIDATE
    elif odds > 0.0 and _is_local_max(profile, idx):
        status = CandidateStatus.NO_SPLIT_PEAK
    else:
        return None
    pre_mean, pre_std = _segment_stats(values[lo:split])
    post_mean, post_std = _segment_stats(values[split:hi])
    return BayesCandidate(
        series_id=series_id,
        split_index=split,
        log_odds=odds,
        window_start=lo,
        window_end=hi,
        pre_mean=pre_mean,
        pre_std=pre_std,
        post_mean=post_mean,
        post_std=post_std,
        status=status,
    )


def _build_step_function(
    series_id: str, values: np.ndarray, accepted: list[int]
) -> StepFunction:
    breakpoints = [0] + sorted(accepted)
    bounds = breakpoints + [values.size]
    levels = []
    stddevs = []
    for lo, hi in zip(bounds, bounds[1:]):
        mean, std = _segment_stats(values[lo:hi])
        levels.append(mean)
        stddevs.append(std)
    return StepFunction(series_id, tuple(breakpoints), tuple(levels), tuple(stddevs))


def _scan_values(series: TimeSeries) -> np.ndarray:
    if series.missing:
        raise ArgumentError(
            f"series {series.id!r} still has missing values; preprocess first"
        )
    values = np.asarray(series.values, dtype=float)
    if values.size < 4:
        raise UnusableInputError(
            f"series {series.id!r} too short to scan ({values.size} points)"
        )
    return values


def scan_series(
    series: TimeSeries, config: BayesScanConfig
) -> tuple[list[BayesCandidate], StepFunction]:
    """Scan one series for change-point candidates.

    Windows of ``window_size`` slide with the configured stride (the whole
    series if unset or longer than the series).  Each window contributes its
    argmax split; duplicates from overlapping windows keep the highest log
    odds.  When ``refine`` is set, accepted candidates are used as segment
    boundaries and each segment is re-searched until no further split clears
    the threshold.  The step function is regenerated from the accepted set.
    """
    values = _scan_values(series)
    n = values.size
    prior = config.prior.resolved_for(values)

    if config.window_size is None or config.window_size > n:
        windows = [(0, n)]
    else:
        w = config.window_size
        stride = config.stride if config.stride is not None else max(1, w // 2)
        starts = list(range(0, n - w + 1, stride))
        if starts[-1] != n - w:
            starts.append(n - w)
        windows = [(s, s + w) for s in starts]

    best: dict[int, BayesCandidate] = {}
    for lo, hi in windows:
        cand = _window_candidate(
            series.id, values, lo, hi, prior, config.log_odds_threshold
        )
        if cand is None:
            continue
        prev = best.get(cand.split_index)
        if prev is None or cand.log_odds > prev.log_odds:
            best[cand.split_index] = cand

    candidates = sorted(best.values(), key=lambda c: c.split_index)
    if config.refine:
        candidates = refine_candidates(series, candidates, config)

    accepted = [c.split_index for c in candidates if c.status is CandidateStatus.CANDIDATE]
    return candidates, _build_step_function(series.id, values, accepted)


def refine_candidates(
    series: TimeSeries, candidates: list[BayesCandidate], config: BayesScanConfig
) -> list[BayesCandidate]:
    """Re-search the segments between accepted candidates for missed splits.

    Boundaries are the accepted candidates plus the series ends.  Each pass
    scans every segment; any interior split above the threshold joins the
    accepted set, and passes repeat until a fixed point.
    """
    values = _scan_values(series)
    n = values.size
    prior = config.prior.resolved_for(values)
    by_index: dict[int, BayesCandidate] = {c.split_index: c for c in candidates}

    while True:
        accepted = sorted(
            i for i, c in by_index.items() if c.status is CandidateStatus.CANDIDATE
        )
        bounds = [0] + accepted + [n]
        added = False
        for lo, hi in zip(bounds, bounds[1:]):
            if hi - lo < 2:
                continue
            cand = _window_candidate(
                series.id, values, lo, hi, prior, config.log_odds_threshold
            )
            if cand is None or cand.status is not CandidateStatus.CANDIDATE:
                continue
            prev = by_index.get(cand.split_index)
            if prev is not None and prev.status is CandidateStatus.CANDIDATE:
                continue
            by_index[cand.split_index] = cand
            added = True
        if not added:
            break

    return sorted(by_index.values(), key=lambda c: c.split_index)
