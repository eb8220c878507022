"""Margin-matched scoring of predicted change points against annotations.

A prediction counts as a true positive when it can be paired one-to-one with
a ground-truth point at distance <= margin; no point on either side is ever
used twice.  The pairing is a maximum-cardinality matching (minimal total
distance among those), computed exactly by dynamic programming over the two
sorted index lists.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

from .data import AnnotationSet, ChangePointSet, Dataset
from .errors import ArgumentError


@dataclass(frozen=True)
class EvalConfig:
    margin: int = 5
    include_origin: bool = False
    consensus_k: int = 1

    def __post_init__(self) -> None:
        if self.margin < 0:
            raise ArgumentError(f"margin must be >= 0, got {self.margin}")
        if self.consensus_k < 1:
            raise ArgumentError(f"consensus_k must be >= 1, got {self.consensus_k}")


@dataclass(frozen=True)
class EvalReport:
    series_id: str
    tp: int
    predicted_count: int
    truth_count: int
    precision: float
    recall: float
    f1: float
    matches: tuple[tuple[int, int], ...]

    def to_dict(self) -> dict:
        return {
            "series_id": self.series_id,
            "tp": self.tp,
            "predicted_count": self.predicted_count,
            "truth_count": self.truth_count,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "matches": [list(m) for m in self.matches],
        }


@dataclass(frozen=True)
class AggregateReport:
    """Macro average over series plus the per-series table."""

    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_series: tuple[EvalReport, ...]

    def to_dict(self) -> dict:
        return {
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_series": [r.to_dict() for r in self.per_series],
        }


def consensus(annotations: list[AnnotationSet], k: int, margin: int = 5) -> ChangePointSet:
    """Aggregate annotators into one truth set.

    k=1 is the deduplicated union.  For k>1, indices are clustered with
    single linkage at distance <= margin and each cluster supported by >= k
    distinct annotators emits its rounded median index.
    """
    if not annotations:
        return ChangePointSet("", ())
    series_id = annotations[0].series_id
    for ann in annotations:
        if ann.series_id != series_id:
            raise ArgumentError(
                f"annotation sets mix series {series_id!r} and {ann.series_id!r}"
            )
    if k == 1:
        union = set()
        for ann in annotations:
            union.update(ann.points.indices)
        return ChangePointSet.from_indices(series_id, union)

    points = sorted(
        (index, ann.annotator_id) for ann in annotations for index in ann.points.indices
    )
    clusters: list[list[tuple[int, str]]] = []
    for index, annotator in points:
        if clusters and index - clusters[-1][-1][0] <= margin:
            clusters[-1].append((index, annotator))
        else:
            clusters.append([(index, annotator)])

    out = []
    for cluster in clusters:
        supporters = {annotator for _, annotator in cluster}
        if len(supporters) >= k:
            out.append(round(statistics.median(index for index, _ in cluster)))
    return ChangePointSet.from_indices(series_id, out)


def match_true_positives(
    pred: ChangePointSet, truth: ChangePointSet, margin: int
) -> list[tuple[int, int]]:
    """Maximum one-to-one matching under ``|pred - truth| <= margin``.

    Among maximum-cardinality matchings the one with minimal total absolute
    distance is returned.  Both inputs are sorted, so an optimal matching
    exists without crossings and the two-list DP is exact.
    """
    ps = pred.indices
    ts = truth.indices
    np_, nt = len(ps), len(ts)
    # dp[i][j] = (matches, -total_distance) using ps[:i], ts[:j]
    dp = [[(0, 0)] * (nt + 1) for _ in range(np_ + 1)]
    for i in range(1, np_ + 1):
        for j in range(1, nt + 1):
            best = max(dp[i - 1][j], dp[i][j - 1])
            if abs(ps[i - 1] - ts[j - 1]) <= margin:
                prev = dp[i - 1][j - 1]
                cand = (prev[0] + 1, prev[1] - abs(ps[i - 1] - ts[j - 1]))
                best = max(best, cand)
            dp[i][j] = best

    matches: list[tuple[int, int]] = []
    i, j = np_, nt
    while i > 0 and j > 0:
        if dp[i][j] == dp[i - 1][j]:
            i -= 1
        elif dp[i][j] == dp[i][j - 1]:
            j -= 1
        else:
            matches.append((ps[i - 1], ts[j - 1]))
            i -= 1
            j -= 1
    matches.reverse()
    return matches


def precision(pred: ChangePointSet, truth: ChangePointSet, margin: int) -> float:
    """|TP| / |pred|; an empty prediction is perfect iff the truth is empty too."""
    if len(pred) == 0:
        return 1.0 if len(truth) == 0 else 0.0
    return len(match_true_positives(pred, truth, margin)) / len(pred)


def recall(pred: ChangePointSet, truth: ChangePointSet, margin: int) -> float:
    """|TP| / |truth|; vacuously 1 when the truth set is empty."""
    if len(truth) == 0:
        return 1.0
    return len(match_true_positives(pred, truth, margin)) / len(truth)


def f1(precision_value: float, recall_value: float) -> float:
    """Harmonic mean; 0 when both inputs are 0."""
    denom = precision_value + recall_value
    if denom == 0:
        return 0.0
    return 2.0 * precision_value * recall_value / denom


def _with_origin(points: ChangePointSet) -> ChangePointSet:
    if 0 in points.indices:
        return ChangePointSet(points.series_id, points.indices, includes_origin=True)
    return ChangePointSet(
        points.series_id, (0,) + points.indices, includes_origin=True
    )


def evaluate(
    pred: ChangePointSet, annotations: list[AnnotationSet], cfg: EvalConfig
) -> EvalReport:
    """Score one series' predictions against its annotations.

    The truth set is the annotator consensus.  In origin mode index 0 is
    inserted into both sides before matching, which is the scoring variant
    where the series start counts as a change point by convention.
    """
    truth = consensus(annotations, cfg.consensus_k, cfg.margin)
    if cfg.include_origin:
        pred = _with_origin(pred)
        truth = _with_origin(truth)
    matches = match_true_positives(pred, truth, cfg.margin)
    p = precision(pred, truth, cfg.margin)
    r = recall(pred, truth, cfg.margin)
    return EvalReport(
        series_id=pred.series_id,
        tp=len(matches),
        predicted_count=len(pred),
        truth_count=len(truth),
        precision=p,
        recall=r,
        f1=f1(p, r),
        matches=tuple(matches),
    )


def evaluate_dataset(
    predictions: dict[str, ChangePointSet], ds: Dataset, cfg: EvalConfig
) -> AggregateReport:
    """Macro-average over every annotated series in the dataset.

    Series without any annotation set carry no label and are skipped; an
    annotated series with no prediction entry scores zero across the board
    (a detection failure, not a vacuous pass).
    """
    reports = []
    for series in ds.series:
        annotations = ds.annotations_for(series.id)
        if not annotations:
            continue
        pred = predictions.get(series.id)
        if pred is None:
            reports.append(
                EvalReport(series.id, 0, 0, 0, 0.0, 0.0, 0.0, ())
            )
            continue
        reports.append(evaluate(pred, annotations, cfg))
    if not reports:
        return AggregateReport(0.0, 0.0, 0.0, ())
    n = len(reports)
    return AggregateReport(
        macro_precision=sum(r.precision for r in reports) / n,
        macro_recall=sum(r.recall for r in reports) / n,
        macro_f1=sum(r.f1 for r in reports) / n,
        per_series=tuple(sorted(reports, key=lambda r: r.series_id)),
    )
