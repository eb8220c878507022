"""Feedback-loop logic: record detections, adjudicate, export, re-tune."""

from __future__ import annotations

import hashlib

from ..data import AnnotationSet, ChangePointSet, Dataset, TimeSeries
from ..errors import NotFoundError, PreconditionError
from ..metrics import EvalConfig
from ..pipeline import (
    BipecConfig,
    DetectionResult,
    config_from_dict,
    config_to_dict,
    detect,
)
from ..tuning import SearchSpace, objective, tune
from .store import ConfigVersion, Detection, EventLogStore, VerdictStatus

VERIFIED_ANNOTATOR = "verified"


class FeedbackService:
    """Couples a read-only dataset with the durable verdict store."""

    def __init__(
        self,
        dataset: Dataset,
        store: EventLogStore,
        initial_config: BipecConfig = BipecConfig(),
        eval_cfg: EvalConfig = EvalConfig(),
        search_space: SearchSpace = SearchSpace(),
    ):
        self.dataset = dataset
        self.store = store
        self.eval_cfg = eval_cfg
        self.search_space = search_space
        if not store.versions():
            store.add_config_version(config_to_dict(initial_config), source="manual")

    # -- configs -------------------------------------------------------------

    def active_config(self) -> BipecConfig:
        return config_from_dict(self.store.active_version().config)

    # -- series --------------------------------------------------------------

    def get_series(self, series_id: str) -> TimeSeries:
        try:
            return self.dataset.series_by_id(series_id)
        except KeyError:
            raise NotFoundError(f"no series {series_id!r}") from None

    def series_summaries(self) -> list[dict]:
        out = []
        for series in self.dataset.series:
            pending = self.store.list_detections(series.id, VerdictStatus.PENDING)
            out.append(
                {
                    "id": series.id,
                    "name": series.name,
                    "length": len(series),
                    "pending_count": len(pending),
                }
            )
        return sorted(out, key=lambda row: row["id"])

    def series_detail(self, series_id: str) -> dict:
        series = self.get_series(series_id)
        version = self.store.active_version()
        fingerprint = self._run_fingerprint(series, version)
        run = self.store.get_run(series.id, fingerprint)
        return {
            "id": series.id,
            "name": series.name,
            "values": [
                None if i in series.missing else v for i, v in enumerate(series.values)
            ],
            "meta": dict(series.meta),
            "annotations": [
                {"annotator": a.annotator_id, "indices": list(a.points.indices)}
                for a in self.dataset.annotations_for(series.id)
            ],
            "active_version": version.version,
            "detection": None if run is None else run["result"],
            "detections": [
                d.to_dict() for d in self.store.list_detections(series_id=series.id)
            ],
        }

    # -- detection runs --------------------------------------------------------

    def _run_fingerprint(self, series: TimeSeries, version: ConfigVersion) -> str:
        payload = repr((version.config, series.id, series.values)).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]

    def run_detection(self, series_id: str) -> tuple[list[Detection], dict]:
        series = self.get_series(series_id)
        version = self.store.active_version()
        fingerprint = self._run_fingerprint(series, version)
        existing = self.store.get_run(series.id, fingerprint)
        if existing is not None:
            return (
                [self.store.get_detection(i) for i in existing["detection_ids"]],
                existing["result"],
            )
        result = detect(series, config_from_dict(version.config))
        result_doc = result.to_dict(include_timings=False)
        detections = self.store.record_run(
            series.id, fingerprint, result_doc, list(result.final.indices)
        )
        return detections, result_doc

    def record_run(self, series_id: str, result: DetectionResult) -> list[str]:
        """Record an externally produced result; idempotent per fingerprint."""
        series = self.get_series(series_id)
        payload = repr(
            (result.config_fingerprint, series.id, series.values)
        ).encode("utf-8")
        fingerprint = hashlib.sha256(payload).hexdigest()[:16]
        detections = self.store.record_run(
            series.id,
            fingerprint,
            result.to_dict(include_timings=False),
            list(result.final.indices),
        )
        return [d.detection_id for d in detections]

    # -- verdicts ---------------------------------------------------------------

    def submit_verdict(
        self,
        detection_id: str,
        status: VerdictStatus,
        modified_index: int | None,
        annotator: str,
    ) -> Detection:
        detection = self.store.get_detection(detection_id)
        series = self.get_series(detection.series_id)
        return self.store.submit_verdict(
            detection_id, status, modified_index, annotator, len(series)
        )

    # -- labels and re-tuning ----------------------------------------------------

    def export_labels(self, series_filter: set[str] | None = None) -> Dataset:
        """Verified labels: confirmed/modified indices, removals as evidence
        of 'no change here', pending contributing nothing."""
        included: list[TimeSeries] = []
        annotations: list[AnnotationSet] = []
        for series in self.dataset.series:
            if series_filter is not None and series.id not in series_filter:
                continue
            detections = self.store.list_detections(series_id=series.id)
            label_indices = sorted(
                {
                    d.effective_index()
                    for d in detections
                    if d.effective_index() is not None
                }
            )
            removed = any(d.status is VerdictStatus.REMOVED for d in detections)
            if not label_indices and not removed:
                continue
            included.append(series)
            annotations.append(
                AnnotationSet(
                    series.id,
                    VERIFIED_ANNOTATOR,
                    ChangePointSet.from_indices(series.id, label_indices),
                )
            )
        return Dataset("verified-labels", tuple(included), tuple(annotations))

    def retune(self, budget: int, seed: int) -> dict:
        """Search for a better config on the verified labels.

        The incumbent keeps its place unless the candidate scores at least
        as well on the same labels; both scores are computed, never assumed.
        """
        labels = self.export_labels()
        if not labels.series:
            raise PreconditionError(
                "no decided labels to tune on; confirm, modify, or remove "
                "detections first"
            )
        incumbent = self.store.active_version()
        incumbent_cfg = config_from_dict(incumbent.config)
        incumbent_f1, incumbent_precision = objective(
            incumbent_cfg, labels, self.eval_cfg
        )
        report = tune(labels, self.search_space, budget, seed, self.eval_cfg)

        accepted = (report.best_f1, report.best_precision) >= (
            incumbent_f1,
            incumbent_precision,
        )
        if accepted:
            version = self.store.add_config_version(
                config_to_dict(report.best), source="retune", tune_report=report.to_dict()
            )
        else:
            version = incumbent
        return {
            "outcome": "accepted" if accepted else "retained",
            "version": version.to_dict(with_tune_report=False),
            "candidate": {"f1": report.best_f1, "precision": report.best_precision},
            "incumbent": {"f1": incumbent_f1, "precision": incumbent_precision},
            "label_series_count": len(labels.series),
        }
