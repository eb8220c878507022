"""Penalized optimal segmentation with an RBF kernel segment cost.

The segment cost is the kernel within-segment scatter
``m - (1/m) * sum_ij exp(-gamma * (y_i - y_j)^2)``: zero for constant
segments, growing with heterogeneity, and subadditive under concatenation,
which is what the pruning rule requires.  The dynamic program maintains one
running kernel sum per live candidate start and updates all of them from a
single kernel row per time step, so each step costs one vectorized pass
instead of a quadratic re-evaluation.

Two entry points share the recursion: :func:`pelt` searches all split
positions (with standard pruning), while :func:`pelt_constrained` only admits
a caller-supplied set of positions, which is how candidates from the
Bayesian stage get confirmed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import ChangePointSet, TimeSeries
from .errors import ArgumentError, UnusableInputError


class BandwidthMode(str, Enum):
    MEDIAN_HEURISTIC = "median_heuristic"
    FIXED = "fixed"


@dataclass(frozen=True)
class PeltConfig:
    pen: float = 3.0
    min_segment_length: int = 2
    bandwidth_mode: BandwidthMode = BandwidthMode.MEDIAN_HEURISTIC
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.pen <= 0:
            raise ArgumentError(f"pen must be > 0, got {self.pen}")
        if self.min_segment_length < 1:
            raise ArgumentError(
                f"min_segment_length must be >= 1, got {self.min_segment_length}"
            )
        if self.bandwidth_mode is BandwidthMode.FIXED and self.gamma <= 0:
            raise ArgumentError(f"gamma must be > 0 when fixed, got {self.gamma}")


@dataclass(frozen=True)
class Segmentation:
    series_id: str
    change_points: ChangePointSet
    total_cost: float


def _values_of(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        if series.missing:
            raise ArgumentError(
                f"series {series.id!r} still has missing values; preprocess first"
            )
        return np.asarray(series.values, dtype=float)
    return np.asarray(series, dtype=float)


MEDIAN_SUBSAMPLE = 500


def median_heuristic_bandwidth(series) -> float:
    """1 / median pairwise squared difference over a strided subsample."""
    values = _values_of(series)
    n = values.size
    if n < 2:
        raise ArgumentError("median heuristic requires at least 2 points")
    if n > MEDIAN_SUBSAMPLE:
        stride = -(-n // MEDIAN_SUBSAMPLE)
        sub = values[::stride]
    else:
        sub = values
    diffs = (sub[:, None] - sub[None, :]) ** 2
    upper = diffs[np.triu_indices(sub.size, k=1)]
    med = float(np.median(upper))
    return 1.0 / med if med > 0 else 1.0


_BLOCK_ROWS = 256


def segment_cost_rbf(series, s: int, t: int, gamma: float) -> float:
    """Kernel within-segment scatter of ``values[s:t]``; 0 for single points."""
    values = _values_of(series)
    if not 0 <= s < t <= values.size:
        raise ArgumentError(f"invalid segment [{s}, {t}) for length {values.size}")
    seg = values[s:t]
    m = seg.size
    if m == 1:
        return 0.0
    total = 0.0
    for lo in range(0, m, _BLOCK_ROWS):
        block = seg[lo : lo + _BLOCK_ROWS]
        total += float(np.exp(-gamma * (block[:, None] - seg[None, :]) ** 2).sum())
    return max(0.0, m - total / m)


def _resolve_gamma(values: np.ndarray, config: PeltConfig) -> float:
    if config.bandwidth_mode is BandwidthMode.FIXED:
        return config.gamma
    return median_heuristic_bandwidth(values)


def _kernel_dp(
    values: np.ndarray,
    beta: float,
    min_seg: int,
    gamma: float,
    admissible: np.ndarray | None,
) -> list[int]:
    """Optimal-partitioning recursion; returns the change-point indices.

    ``admissible`` of None means every position may start a segment and the
    standard pruning rule applies.  Otherwise only listed positions (plus 0)
    may, and pruning is skipped: dropping a candidate at time t is only safe
    when t itself could replace it as a split, which an inadmissible t
    cannot.
    """
    n = values.size
    inf = float("inf")
    F = np.full(n + 1, inf)
    F[0] = -beta
    prev = np.full(n + 1, -1, dtype=np.int64)

    compute_f = np.zeros(n + 1, dtype=bool)
    may_start = np.zeros(n + 1, dtype=bool)
    if admissible is None:
        compute_f[1:] = True
        may_start[:] = True
    else:
        compute_f[admissible] = True
        compute_f[n] = True
        may_start[admissible] = True

    # Live candidate starts, kept sorted, with their running kernel sums
    # G[k] = sum_ij exp(-gamma (y_i - y_j)^2) over [idx[k], t).
    idx_buf = np.empty(n + 1, dtype=np.int64)
    g_buf = np.empty(n + 1, dtype=float)
    idx_buf[0] = 0
    g_buf[0] = 0.0
    m = 1

    for t in range(1, n + 1):
        base = int(idx_buf[0])
        y_new = values[t - 1]
        row = np.exp(-gamma * (values[base : t - 1] - y_new) ** 2)
        # suffix[j] = sum of row[j:]; one extra 0 so a start at t-1 maps to 0.
        suffix = np.zeros(row.size + 1)
        if row.size:
            suffix[:-1] = np.cumsum(row[::-1])[::-1]
        live_idx = idx_buf[:m]
        g_buf[:m] += 2.0 * suffix[live_idx - base] + 1.0

        if compute_f[t]:
            lengths = t - live_idx
            valid = lengths >= min_seg
            if np.any(valid):
                costs = lengths[valid] - g_buf[:m][valid] / lengths[valid]
                totals = F[live_idx[valid]] + costs + beta
                k = int(np.argmin(totals))
                F[t] = float(totals[k])
                prev[t] = int(live_idx[valid][k])
                if admissible is None and F[t] < inf:
                    # Prune starts that can never win again.
                    keep = np.ones(m, dtype=bool)
                    keep[valid] = totals - beta <= F[t]
                    if not np.all(keep):
                        kept = int(np.count_nonzero(keep))
                        idx_buf[:kept] = live_idx[keep]
                        g_buf[:kept] = g_buf[:m][keep]
                        m = kept

        if t < n and may_start[t] and F[t] < inf:
            idx_buf[m] = t
            g_buf[m] = 0.0
            m += 1

    cps = []
    t = n
    while t > 0:
        s = int(prev[t])
        if s <= 0:
            break
        cps.append(s)
        t = s
    cps.reverse()
    return cps


def _total_cost(values: np.ndarray, cps: list[int], beta: float, gamma: float) -> float:
    bounds = [0] + list(cps) + [values.size]
    total = 0.0
    for lo, hi in zip(bounds, bounds[1:]):
        total += segment_cost_rbf(values, lo, hi, gamma)
    return total + beta * len(cps)


def pelt(series, config: PeltConfig) -> Segmentation:
    """Exactly optimal segmentation under segment costs plus ``pen`` per split."""
    values = _values_of(series)
    sid = series.id if isinstance(series, TimeSeries) else "series"
    if values.size < 2 * config.min_segment_length:
        raise UnusableInputError(
            f"series {sid!r} too short for segmentation "
            f"({values.size} < 2 * {config.min_segment_length})"
        )
    gamma = _resolve_gamma(values, config)
    cps = _kernel_dp(values, config.pen, config.min_segment_length, gamma, None)
    return Segmentation(
        series_id=sid,
        change_points=ChangePointSet.from_indices(sid, cps),
        total_cost=_total_cost(values, cps, config.pen, gamma),
    )


def pelt_constrained(series, admissible: ChangePointSet, config: PeltConfig) -> Segmentation:
    """Optimal segmentation whose change points are a subset of ``admissible``."""
    values = _values_of(series)
    sid = series.id if isinstance(series, TimeSeries) else admissible.series_id
    if values.size < 2 * config.min_segment_length:
        raise UnusableInputError(
            f"series {sid!r} too short for segmentation "
            f"({values.size} < 2 * {config.min_segment_length})"
        )
    n = values.size
    allowed = np.array(
        sorted(i for i in admissible.indices if 1 <= i <= n - 1), dtype=np.int64
    )
    gamma = _resolve_gamma(values, config)
    cps = _kernel_dp(values, config.pen, config.min_segment_length, gamma, allowed)
    return Segmentation(
        series_id=sid,
        change_points=ChangePointSet.from_indices(sid, cps),
        total_cost=_total_cost(values, cps, config.pen, gamma),
    )
