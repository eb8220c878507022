"""The end-to-end two-stage detector.

One ``detect`` call preprocesses a series, scans it (optionally in chunks)
for Bayesian candidates, then runs the candidate-constrained segmentation on
the full preprocessed series so the confirmation objective stays global.
Final change points are therefore always a subset of the candidate set, which
is what makes the second stage a confirmation rather than a second opinion.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bayes import (
    BayesCandidate,
    BayesScanConfig,
    CandidateStatus,
    Distribution,
    PriorSpec,
    StepFunction,
    _build_step_function,
    scan_series,
)
from .data import ChangePointSet, Dataset, TimeSeries
from .errors import ArgumentError, BipecError, ParseError
from .pelt import BandwidthMode, PeltConfig, _resolve_gamma, pelt_constrained, segment_cost_rbf
from .preprocess import MissingPolicy, PreprocessConfig, preprocess, standardize


@dataclass(frozen=True)
class BipecConfig:
    preprocess: PreprocessConfig = PreprocessConfig()
    bayes: BayesScanConfig = BayesScanConfig()
    pelt: PeltConfig = PeltConfig()
    chunk_size: int = 0
    chunk_overlap: int | None = None
    merge_margin: int = 3
    include_no_split_peaks: bool = False

    def __post_init__(self) -> None:
        if self.chunk_size < 0:
            raise ArgumentError(f"chunk_size must be >= 0, got {self.chunk_size}")
        if self.merge_margin < 1:
            raise ArgumentError(f"merge_margin must be >= 1, got {self.merge_margin}")
        if self.chunk_size:
            overlap = self.resolved_overlap()
            if not 0 <= overlap < self.chunk_size:
                raise ArgumentError(
                    f"chunk_overlap {overlap} must be in [0, chunk_size) "
                    f"for chunk_size {self.chunk_size}"
                )

    def resolved_overlap(self) -> int:
        """Overlap between consecutive chunks; defaults to the scan window."""
        if self.chunk_overlap is not None:
            return self.chunk_overlap
        if self.bayes.window_size is not None:
            return min(self.bayes.window_size, max(0, self.chunk_size - 1))
        return self.chunk_size // 10


@dataclass(frozen=True)
class DetectionResult:
    series_id: str
    final: ChangePointSet
    pre_change_points: tuple[BayesCandidate, ...]
    confirmed_from: dict[int, int]
    step: StepFunction
    config_fingerprint: str
    timings: dict[str, float] = field(default_factory=dict)
    method: str = "bipec"

    def to_dict(self, include_timings: bool = True) -> dict:
        doc = {
            "series_id": self.series_id,
            "method": self.method,
            "final": list(self.final.indices),
            "pre_change_points": [
                {
                    "split_index": c.split_index,
                    "log_odds": c.log_odds,
                    "window_start": c.window_start,
                    "window_end": c.window_end,
                    "pre_mean": c.pre_mean,
                    "pre_std": c.pre_std,
                    "post_mean": c.post_mean,
                    "post_std": c.post_std,
                    "status": c.status.value,
                }
                for c in self.pre_change_points
            ],
            "confirmed_from": {str(k): v for k, v in sorted(self.confirmed_from.items())},
            "step": {
                "breakpoints": list(self.step.breakpoints),
                "levels": list(self.step.levels),
                "stddevs": list(self.step.stddevs),
            },
            "config_fingerprint": self.config_fingerprint,
        }
        if include_timings:
            doc["timings"] = dict(self.timings)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "DetectionResult":
        sid = doc["series_id"]
        candidates = tuple(
            BayesCandidate(
                series_id=sid,
                split_index=c["split_index"],
                log_odds=c["log_odds"],
                window_start=c["window_start"],
                window_end=c["window_end"],
                pre_mean=c["pre_mean"],
                pre_std=c["pre_std"],
                post_mean=c["post_mean"],
                post_std=c["post_std"],
                status=CandidateStatus(c["status"]),
            )
            for c in doc.get("pre_change_points", [])
        )
        step = doc.get("step") or {"breakpoints": [0], "levels": [0.0], "stddevs": [0.0]}
        return cls(
            series_id=sid,
            final=ChangePointSet.from_indices(sid, doc["final"]),
            pre_change_points=candidates,
            confirmed_from={int(k): v for k, v in doc.get("confirmed_from", {}).items()},
            step=StepFunction(
                sid,
                tuple(step["breakpoints"]),
                tuple(step["levels"]),
                tuple(step["stddevs"]),
            ),
            config_fingerprint=doc.get("config_fingerprint", ""),
            timings=doc.get("timings", {}),
            method=doc.get("method", "bipec"),
        )


@dataclass(frozen=True)
class BatchResult:
    results: dict[str, DetectionResult]
    errors: dict[str, str]


# ---------------------------------------------------------------------------
# config <-> JSON
# ---------------------------------------------------------------------------


def _take(section: dict, origin: str, known: set[str]) -> None:
    unknown = set(section) - known
    if unknown:
        raise ParseError(f"{origin}: unknown key(s) {sorted(unknown)}")


def config_to_dict(config: BipecConfig) -> dict:
    return {
        "preprocess": {
            "outlier_window": config.preprocess.outlier_window,
            "outlier_k": config.preprocess.outlier_k,
            "smooth_window": config.preprocess.smooth_window,
            "standardize": config.preprocess.standardize,
            "missing_policy": config.preprocess.missing_policy.value,
        },
        "bayes": {
            "log_odds_threshold": config.bayes.log_odds_threshold,
            "window_size": config.bayes.window_size,
            "stride": config.bayes.stride,
            "refine": config.bayes.refine,
            "prior": {
                "distribution": config.bayes.prior.distribution.value,
                "poisson_gamma_shape": config.bayes.prior.poisson_gamma_shape,
                "poisson_gamma_rate": config.bayes.prior.poisson_gamma_rate,
                "gaussian_mean_prior": config.bayes.prior.gaussian_mean_prior,
                "gaussian_precision_scale": config.bayes.prior.gaussian_precision_scale,
                "gaussian_ig_shape": config.bayes.prior.gaussian_ig_shape,
                "gaussian_ig_scale": config.bayes.prior.gaussian_ig_scale,
            },
        },
        "pelt": {
            "pen": config.pelt.pen,
            "min_segment_length": config.pelt.min_segment_length,
            "bandwidth_mode": config.pelt.bandwidth_mode.value,
            "gamma": config.pelt.gamma,
        },
        "chunking": {
            "chunk_size": config.chunk_size,
            "chunk_overlap": config.chunk_overlap,
            "merge_margin": config.merge_margin,
            "include_no_split_peaks": config.include_no_split_peaks,
        },
    }


def config_from_dict(doc: dict, origin: str = "config") -> BipecConfig:
    _take(doc, origin, {"preprocess", "bayes", "pelt", "chunking"})

    pre_doc = doc.get("preprocess", {})
    _take(
        pre_doc,
        f"{origin}.preprocess",
        {"outlier_window", "outlier_k", "smooth_window", "standardize", "missing_policy"},
    )
    defaults = PreprocessConfig()
    try:
        pre = PreprocessConfig(
            outlier_window=pre_doc.get("outlier_window", defaults.outlier_window),
            outlier_k=pre_doc.get("outlier_k", defaults.outlier_k),
            smooth_window=pre_doc.get("smooth_window", defaults.smooth_window),
            standardize=pre_doc.get("standardize", defaults.standardize),
            missing_policy=MissingPolicy(
                pre_doc.get("missing_policy", defaults.missing_policy.value)
            ),
        )
    except ValueError as exc:
        raise ParseError(f"{origin}.preprocess: {exc}") from exc

    bayes_doc = doc.get("bayes", {})
    _take(
        bayes_doc,
        f"{origin}.bayes",
        {"log_odds_threshold", "window_size", "stride", "refine", "prior"},
    )
    prior_doc = bayes_doc.get("prior", {})
    _take(
        prior_doc,
        f"{origin}.bayes.prior",
        {
            "distribution",
            "poisson_gamma_shape",
            "poisson_gamma_rate",
            "gaussian_mean_prior",
            "gaussian_precision_scale",
            "gaussian_ig_shape",
            "gaussian_ig_scale",
        },
    )
    prior_defaults = PriorSpec()
    try:
        prior = PriorSpec(
            distribution=Distribution(
                prior_doc.get("distribution", prior_defaults.distribution.value)
            ),
            poisson_gamma_shape=prior_doc.get(
                "poisson_gamma_shape", prior_defaults.poisson_gamma_shape
            ),
            poisson_gamma_rate=prior_doc.get(
                "poisson_gamma_rate", prior_defaults.poisson_gamma_rate
            ),
            gaussian_mean_prior=prior_doc.get(
                "gaussian_mean_prior", prior_defaults.gaussian_mean_prior
            ),
            gaussian_precision_scale=prior_doc.get(
                "gaussian_precision_scale", prior_defaults.gaussian_precision_scale
            ),
            gaussian_ig_shape=prior_doc.get(
                "gaussian_ig_shape", prior_defaults.gaussian_ig_shape
            ),
            gaussian_ig_scale=prior_doc.get(
                "gaussian_ig_scale", prior_defaults.gaussian_ig_scale
            ),
        )
        scan_defaults = BayesScanConfig()
        bayes = BayesScanConfig(
            prior=prior,
            log_odds_threshold=bayes_doc.get(
                "log_odds_threshold", scan_defaults.log_odds_threshold
            ),
            window_size=bayes_doc.get("window_size", scan_defaults.window_size),
            stride=bayes_doc.get("stride", scan_defaults.stride),
            refine=bayes_doc.get("refine", scan_defaults.refine),
        )
    except ValueError as exc:
        raise ParseError(f"{origin}.bayes: {exc}") from exc

    pelt_doc = doc.get("pelt", {})
    _take(
        pelt_doc,
        f"{origin}.pelt",
        {"pen", "min_segment_length", "bandwidth_mode", "gamma"},
    )
    pelt_defaults = PeltConfig()
    try:
        pelt_cfg = PeltConfig(
            pen=pelt_doc.get("pen", pelt_defaults.pen),
            min_segment_length=pelt_doc.get(
                "min_segment_length", pelt_defaults.min_segment_length
            ),
            bandwidth_mode=BandwidthMode(
                pelt_doc.get("bandwidth_mode", pelt_defaults.bandwidth_mode.value)
            ),
            gamma=pelt_doc.get("gamma", pelt_defaults.gamma),
        )
    except ValueError as exc:
        raise ParseError(f"{origin}.pelt: {exc}") from exc

    chunk_doc = doc.get("chunking", {})
    _take(
        chunk_doc,
        f"{origin}.chunking",
        {"chunk_size", "chunk_overlap", "merge_margin", "include_no_split_peaks"},
    )
    try:
        return BipecConfig(
            preprocess=pre,
            bayes=bayes,
            pelt=pelt_cfg,
            chunk_size=chunk_doc.get("chunk_size", 0),
            chunk_overlap=chunk_doc.get("chunk_overlap", None),
            merge_margin=chunk_doc.get("merge_margin", 3),
            include_no_split_peaks=chunk_doc.get("include_no_split_peaks", False),
        )
    except ValueError as exc:
        raise ParseError(f"{origin}.chunking: {exc}") from exc


def config_fingerprint(config: BipecConfig) -> str:
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# detection
# ---------------------------------------------------------------------------


def _chunks(n: int, size: int, overlap: int) -> list[tuple[int, int]]:
    if size <= 0 or size >= n:
        return [(0, n)]
    step = size - overlap
    starts = list(range(0, n - size + 1, step))
    if starts[-1] != n - size:
        starts.append(n - size)
    return [(s, s + size) for s in starts]


def _shift(candidate: BayesCandidate, offset: int) -> BayesCandidate:
    if offset == 0:
        return candidate
    return replace(
        candidate,
        split_index=candidate.split_index + offset,
        window_start=candidate.window_start + offset,
        window_end=candidate.window_end + offset,
    )


def _merge_close(
    cps: list[int], values: np.ndarray, margin: int, beta: float, gamma: float
) -> list[int]:
    """Collapse final points closer than ``margin``.

    Of each too-close pair, keep the variant whose removal leaves the lower
    total segmentation cost; ties drop the larger index.
    """

    def objective(points: list[int]) -> float:
        bounds = [0] + points + [values.size]
        return sum(
            segment_cost_rbf(values, lo, hi, gamma) for lo, hi in zip(bounds, bounds[1:])
        ) + beta * len(points)

    points = sorted(cps)
    while True:
        close = [
            i
            for i in range(len(points) - 1)
            if points[i + 1] - points[i] < margin
        ]
        if not close:
            return points
        i = close[0]
        without_right = points[: i + 1] + points[i + 2 :]
        without_left = points[:i] + points[i + 1 :]
        # <= keeps the smaller index on ties.
        if objective(without_right) <= objective(without_left):
            points = without_right
        else:
            points = without_left


def detect(series: TimeSeries, config: BipecConfig = BipecConfig()) -> DetectionResult:
    """Run the full two-stage detection on one series."""
    fingerprint = config_fingerprint(config)
    timings: dict[str, float] = {}

    poisson = config.bayes.prior.distribution is Distribution.POISSON
    pre_cfg = config.preprocess
    if poisson and pre_cfg.standardize:
        # Count models need the raw scale; the bandwidth heuristic copes.
        pre_cfg = replace(pre_cfg, standardize=False)

    t0 = time.perf_counter()
    try:
        display = preprocess(series, replace(pre_cfg, standardize=False))
        prepared = standardize(display)[0] if pre_cfg.standardize else display
    except BipecError as exc:
        raise type(exc)(f"series {series.id!r}: {exc}") from exc
    timings["preprocess_s"] = time.perf_counter() - t0

    values = np.asarray(prepared.values, dtype=float)
    n = values.size

    t0 = time.perf_counter()
    overlap = config.resolved_overlap() if config.chunk_size else 0
    best: dict[int, BayesCandidate] = {}
    try:
        for lo, hi in _chunks(n, config.chunk_size, overlap):
            chunk = replace(prepared, values=prepared.values[lo:hi])
            chunk_candidates, _ = scan_series(chunk, config.bayes)
            for cand in chunk_candidates:
                shifted = _shift(cand, lo)
                prev = best.get(shifted.split_index)
                if prev is None or shifted.log_odds > prev.log_odds:
                    best[shifted.split_index] = shifted
    except BipecError as exc:
        raise type(exc)(f"series {series.id!r}: {exc}") from exc
    candidates = tuple(sorted(best.values(), key=lambda c: c.split_index))
    timings["bayes_s"] = time.perf_counter() - t0

    admissible = [
        c.split_index
        for c in candidates
        if c.status is CandidateStatus.CANDIDATE
        or (config.include_no_split_peaks and c.status is CandidateStatus.NO_SPLIT_PEAK)
    ]

    t0 = time.perf_counter()
    gamma = _resolve_gamma(values, config.pelt)
    pinned = replace(config.pelt, bandwidth_mode=BandwidthMode.FIXED, gamma=gamma)
    try:
        segmentation = pelt_constrained(
            prepared, ChangePointSet.from_indices(series.id, admissible), pinned
        )
    except BipecError as exc:
        raise type(exc)(f"series {series.id!r}: {exc}") from exc
    final = _merge_close(
        list(segmentation.change_points.indices),
        values,
        config.merge_margin,
        config.pelt.pen,
        gamma,
    )
    timings["pelt_s"] = time.perf_counter() - t0
    timings["total_s"] = sum(timings.values())

    display_values = np.asarray(display.values, dtype=float)
    return DetectionResult(
        series_id=series.id,
        final=ChangePointSet.from_indices(series.id, final),
        pre_change_points=candidates,
        confirmed_from={i: i for i in final},
        step=_build_step_function(series.id, display_values, final),
        config_fingerprint=fingerprint,
        timings=timings,
    )


def detect_pelt_only(series: TimeSeries, config: BipecConfig = BipecConfig()) -> DetectionResult:
    """Baseline: unconstrained segmentation, no Bayesian gate."""
    from .pelt import pelt

    fingerprint = config_fingerprint(config)
    poisson = config.bayes.prior.distribution is Distribution.POISSON
    pre_cfg = config.preprocess
    if poisson and pre_cfg.standardize:
        pre_cfg = replace(pre_cfg, standardize=False)
    t0 = time.perf_counter()
    display = preprocess(series, replace(pre_cfg, standardize=False))
    prepared = standardize(display)[0] if pre_cfg.standardize else display
    segmentation = pelt(prepared, config.pelt)
    final = list(segmentation.change_points.indices)
    timings = {"total_s": time.perf_counter() - t0}
    return DetectionResult(
        series_id=series.id,
        final=ChangePointSet.from_indices(series.id, final),
        pre_change_points=(),
        confirmed_from={},
        step=_build_step_function(
            series.id, np.asarray(display.values, dtype=float), final
        ),
        config_fingerprint=fingerprint,
        timings=timings,
        method="pelt",
    )


def detect_bayes_only(series: TimeSeries, config: BipecConfig = BipecConfig()) -> DetectionResult:
    """Baseline: accepted scan candidates reported as final, no confirmation."""
    fingerprint = config_fingerprint(config)
    poisson = config.bayes.prior.distribution is Distribution.POISSON
    pre_cfg = config.preprocess
    if poisson and pre_cfg.standardize:
        pre_cfg = replace(pre_cfg, standardize=False)
    t0 = time.perf_counter()
    display = preprocess(series, replace(pre_cfg, standardize=False))
    prepared = standardize(display)[0] if pre_cfg.standardize else display
    candidates, _ = scan_series(prepared, config.bayes)
    final = [
        c.split_index for c in candidates if c.status is CandidateStatus.CANDIDATE
    ]
    timings = {"total_s": time.perf_counter() - t0}
    return DetectionResult(
        series_id=series.id,
        final=ChangePointSet.from_indices(series.id, final),
        pre_change_points=tuple(candidates),
        confirmed_from={i: i for i in final},
        step=_build_step_function(
            series.id, np.asarray(display.values, dtype=float), sorted(final)
        ),
        config_fingerprint=fingerprint,
        timings=timings,
        method="bayes",
    )


DETECTORS = {
    "bipec": detect,
    "pelt": detect_pelt_only,
    "bayes": detect_bayes_only,
}


def detect_batch(
    ds: Dataset,
    config: BipecConfig = BipecConfig(),
    max_workers: int = 1,
    method: str = "bipec",
) -> BatchResult:
    """Detect every series independently; failures are collected, not fatal.

    Results are keyed by series id, so worker count cannot change outputs.
    """
    detector = DETECTORS[method]
    results: dict[str, DetectionResult] = {}
    errors: dict[str, str] = {}

    def run(series: TimeSeries) -> tuple[str, DetectionResult | None, str | None]:
        try:
            return series.id, detector(series, config), None
        except BipecError as exc:
            return series.id, None, str(exc)

    if max_workers <= 1:
        rows = [run(s) for s in ds.series]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(run, ds.series))

    for sid, result, error in rows:
        if result is not None:
            results[sid] = result
        else:
            errors[sid] = error or "unknown error"
    return BatchResult(results=results, errors=errors)
