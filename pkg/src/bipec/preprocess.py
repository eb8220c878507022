"""Outlier elimination, noise reduction, and standardization before detection.

All operations preserve length and index alignment, so a change point found
at index t in the preprocessed series refers to index t in the raw series.
The pipeline order is fixed: fill_missing -> remove_outliers -> smooth ->
standardize.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .data import TimeSeries
from .errors import ArgumentError, UnusableInputError

# Consistent estimator factor: 1.4826 * MAD estimates the stddev of a Gaussian.
MAD_SCALE = 1.4826


class MissingPolicy(str, Enum):
    INTERPOLATE_LINEAR = "interpolate_linear"
    CARRY_FORWARD = "carry_forward"
    DROP_LEADING = "drop_leading"


@dataclass(frozen=True)
class PreprocessConfig:
    outlier_window: int = 7
    outlier_k: float = 3.0
    smooth_window: int = 1
    standardize: bool = True
    missing_policy: MissingPolicy = MissingPolicy.INTERPOLATE_LINEAR

    def __post_init__(self) -> None:
        if self.outlier_window < 3 or self.outlier_window % 2 == 0:
            raise ArgumentError(
                f"outlier_window must be an odd integer >= 3, got {self.outlier_window}"
            )
        if self.outlier_k <= 0:
            raise ArgumentError(f"outlier_k must be > 0, got {self.outlier_k}")
        if self.smooth_window < 1:
            raise ArgumentError(f"smooth_window must be >= 1, got {self.smooth_window}")


def _with_values(series: TimeSeries, values: np.ndarray, missing=frozenset()) -> TimeSeries:
    return replace(series, values=tuple(float(v) for v in values), missing=frozenset(missing))


def fill_missing(series: TimeSeries, policy: MissingPolicy) -> TimeSeries:
    """Resolve the missing-value mask; non-missing values are unchanged."""
    if len(series.missing) == 0:
        return series
    n = len(series)
    observed = [i for i in range(n) if i not in series.missing]
    if not observed:
        raise UnusableInputError(f"series {series.id!r} has no observed values")

    values = np.asarray(series.values, dtype=float)
    policy = MissingPolicy(policy)
    if policy is MissingPolicy.INTERPOLATE_LINEAR:
        filled = np.interp(np.arange(n), observed, values[observed])
        return _with_values(series, filled)
    if policy is MissingPolicy.CARRY_FORWARD:
        filled = values.copy()
        # Leading gap is backfilled from the first observation.
        filled[: observed[0]] = values[observed[0]]
        last = values[observed[0]]
        for i in range(observed[0], n):
            if i in series.missing:
                filled[i] = last
            else:
                last = filled[i]
        return _with_values(series, filled)
    if policy is MissingPolicy.DROP_LEADING:
        # The one policy that changes length: the leading gap is removed,
        # interior gaps are carried forward.  Opt-in only; the default
        # pipeline keeps index alignment with the raw series.
        first = observed[0]
        trimmed = replace(
            series,
            values=series.values[first:],
            missing=frozenset(i - first for i in series.missing if i >= first),
        )
        return fill_missing(trimmed, MissingPolicy.CARRY_FORWARD)
    raise ArgumentError(f"unknown missing policy {policy!r}")


def _rolling_median_mad(values: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    n = len(values)
    half = window // 2
    medians = np.empty(n)
    mads = np.empty(n)
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        win = values[lo:hi]
        med = np.median(win)
        medians[i] = med
        mads[i] = np.median(np.abs(win - med))
    return medians, mads


def remove_outliers(series: TimeSeries, window: int = 7, k: float = 3.0) -> TimeSeries:
    """Hampel-style replacement of rolling-median outliers.

    A point whose absolute deviation from the centered rolling median exceeds
    ``k * (1.4826 * rolling MAD)`` is replaced by that rolling median.  A lone
    spike is removed while a genuine level shift survives, which is exactly
    the asymmetry detection needs.
    """
    if series.missing:
        raise ArgumentError("remove_outliers requires a series without missing values")
    if window % 2 == 0 or window < 3:
        raise ArgumentError(f"window must be an odd integer >= 3, got {window}")
    if window >= len(series):
        raise ArgumentError(
            f"window {window} must be smaller than series length {len(series)}"
        )
    if k <= 0:
        raise ArgumentError(f"k must be > 0, got {k}")

    values = np.asarray(series.values, dtype=float)
    medians, mads = _rolling_median_mad(values, window)
    threshold = k * MAD_SCALE * mads
    out = np.where(np.abs(values - medians) > threshold, medians, values)
    return _with_values(series, out)


def smooth(series: TimeSeries, window: int = 1) -> TimeSeries:
    """Centered moving average with shrinking windows at the edges."""
    if series.missing:
        raise ArgumentError("smooth requires a series without missing values")
    if window < 1:
        raise ArgumentError(f"window must be >= 1, got {window}")
    if window == 1:
        return series
    values = np.asarray(series.values, dtype=float)
    n = len(values)
    half = window // 2
    out = np.empty(n)
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        out[i] = values[lo:hi].mean()
    return _with_values(series, out)


def standardize(series: TimeSeries) -> tuple[TimeSeries, float, float]:
    """Shift/scale to sample mean 0 and sample stddev 1.

    Returns ``(standardized, mean, stddev)``; the returned pair inverts the
    transform.  A constant series maps to all zeros with stddev 0.
    """
    if series.missing:
        raise ArgumentError("standardize requires a series without missing values")
    if len(series) < 2:
        raise ArgumentError("standardize requires at least 2 points")
    values = np.asarray(series.values, dtype=float)
    mean = float(values.mean())
    stddev = float(values.std(ddof=1))
    if stddev == 0.0:
        return _with_values(series, np.zeros_like(values)), mean, 0.0
    return _with_values(series, (values - mean) / stddev), mean, stddev


def preprocess(series: TimeSeries, config: PreprocessConfig) -> TimeSeries:
    """Run the full fixed-order pipeline on one series."""
    out = fill_missing(series, config.missing_policy)
    if config.outlier_window < len(out):
        out = remove_outliers(out, config.outlier_window, config.outlier_k)
    if config.smooth_window > 1:
        out = smooth(out, config.smooth_window)
    if config.standardize:
        out, _, _ = standardize(out)
    return out
