"""Durable single-writer store for detections, verdicts, and config versions.

Persistence is an append-only JSONL event log plus a periodic snapshot, both
in one directory:

    events.log     one JSON object per line: {"seq", "ts", "type", ...}
    snapshot.json  {"snapshot_seq": int, "state": {...}}

Every mutation appends one event and fsyncs before returning, so an
acknowledged write survives a process kill; recovery loads the snapshot and
replays the log tail.  A half-written trailing line (crash mid-append) is
ignored because its event was never acknowledged.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from ..errors import NotFoundError, ValidationError

EVENTS_NAME = "events.log"
SNAPSHOT_NAME = "snapshot.json"


class VerdictStatus(str, Enum):
    PENDING = "pending"
    CONFIRMED = "confirmed"
    REMOVED = "removed"
    MODIFIED = "modified"


DECIDED = {VerdictStatus.CONFIRMED, VerdictStatus.REMOVED, VerdictStatus.MODIFIED}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@dataclass(frozen=True)
class Detection:
    detection_id: str
    series_id: str
    index: int
    run_fingerprint: str
    created_at: str
    status: VerdictStatus = VerdictStatus.PENDING
    modified_index: int | None = None
    annotator: str | None = None
    decided_at: str | None = None
    previously_removed: bool = False

    def effective_index(self) -> int | None:
        """The index this detection contributes as a verified label."""
        if self.status is VerdictStatus.CONFIRMED:
            return self.index
        if self.status is VerdictStatus.MODIFIED:
            return self.modified_index
        return None

    def to_dict(self) -> dict:
        return {
            "detection_id": self.detection_id,
            "series_id": self.series_id,
            "index": self.index,
            "run_fingerprint": self.run_fingerprint,
            "created_at": self.created_at,
            "status": self.status.value,
            "modified_index": self.modified_index,
            "annotator": self.annotator,
            "decided_at": self.decided_at,
            "previously_removed": self.previously_removed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Detection":
        return cls(
            detection_id=doc["detection_id"],
            series_id=doc["series_id"],
            index=doc["index"],
            run_fingerprint=doc["run_fingerprint"],
            created_at=doc["created_at"],
            status=VerdictStatus(doc["status"]),
            modified_index=doc.get("modified_index"),
            annotator=doc.get("annotator"),
            decided_at=doc.get("decided_at"),
            previously_removed=doc.get("previously_removed", False),
        )


@dataclass(frozen=True)
class ConfigVersion:
    version: int
    config: dict
    source: str  # "manual" | "retune"
    tune_report: dict | None = None
    activated_at: str = ""

    def to_dict(self, with_tune_report: bool = True) -> dict:
        doc = {
            "version": self.version,
            "config": self.config,
            "source": self.source,
            "activated_at": self.activated_at,
        }
        if with_tune_report:
            doc["tune_report"] = self.tune_report
        return doc


@dataclass
class _State:
    detections: dict[str, Detection] = field(default_factory=dict)
    runs: dict[str, dict] = field(default_factory=dict)  # key: sid|fingerprint
    versions: list[ConfigVersion] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "detections": {k: d.to_dict() for k, d in self.detections.items()},
            "runs": self.runs,
            "versions": [
                {**v.to_dict(), "tune_report": v.tune_report} for v in self.versions
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "_State":
        return cls(
            detections={
                k: Detection.from_dict(d) for k, d in doc.get("detections", {}).items()
            },
            runs=dict(doc.get("runs", {})),
            versions=[
                ConfigVersion(
                    version=v["version"],
                    config=v["config"],
                    source=v["source"],
                    tune_report=v.get("tune_report"),
                    activated_at=v.get("activated_at", ""),
                )
                for v in doc.get("versions", [])
            ],
        )


def _run_key(series_id: str, fingerprint: str) -> str:
    return f"{series_id}|{fingerprint}"


class EventLogStore:
    """All mutations serialize through one lock and one log appender."""

    def __init__(self, store_dir: str | Path, snapshot_every: int = 100):
        self._dir = Path(store_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._snapshot_every = snapshot_every
        self._state = _State()
        self._seq = 0
        self._recover()
        self._log_fd = os.open(
            self._dir / EVENTS_NAME, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644
        )

    # -- recovery ----------------------------------------------------------

    def _recover(self) -> None:
        snap_path = self._dir / SNAPSHOT_NAME
        snapshot_seq = 0
        if snap_path.is_file():
            doc = json.loads(snap_path.read_text(encoding="utf-8"))
            snapshot_seq = doc["snapshot_seq"]
            self._state = _State.from_dict(doc["state"])
        self._seq = snapshot_seq

        log_path = self._dir / EVENTS_NAME
        if not log_path.is_file():
            return
        with log_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError:
                    break  # unacknowledged torn tail write
                if event["seq"] <= snapshot_seq:
                    continue
                self._apply(event)
                self._seq = event["seq"]

    # -- event plumbing ------------------------------------------------------

    def _apply(self, event: dict) -> None:
        kind = event["type"]
        if kind == "run":
            detections = [Detection.from_dict(d) for d in event["detections"]]
            for det in detections:
                self._state.detections[det.detection_id] = det
            self._state.runs[_run_key(event["series_id"], event["run_fingerprint"])] = {
                "series_id": event["series_id"],
                "run_fingerprint": event["run_fingerprint"],
                "result": event["result"],
                "detection_ids": [d.detection_id for d in detections],
                "created_at": event["ts"],
            }
        elif kind == "verdict":
            det = self._state.detections[event["detection_id"]]
            self._state.detections[det.detection_id] = replace(
                det,
                status=VerdictStatus(event["status"]),
                modified_index=event.get("modified_index"),
                annotator=event.get("annotator"),
                decided_at=event["ts"],
            )
        elif kind == "config":
            self._state.versions.append(
                ConfigVersion(
                    version=event["version"],
                    config=event["config"],
                    source=event["source"],
                    tune_report=event.get("tune_report"),
                    activated_at=event["ts"],
                )
            )
        else:
            raise ValidationError(f"unknown event type {kind!r} in log")

    def _append(self, event: dict) -> dict:
        self._seq += 1
        event = {"seq": self._seq, "ts": _now(), **event}
        data = (json.dumps(event, sort_keys=True) + "\n").encode("utf-8")
        os.write(self._log_fd, data)
        os.fsync(self._log_fd)
        self._apply(event)
        if self._seq % self._snapshot_every == 0:
            self._write_snapshot()
        return event

    def _write_snapshot(self) -> None:
        doc = {"snapshot_seq": self._seq, "state": self._state.to_dict()}
        tmp = self._dir / (SNAPSHOT_NAME + ".tmp")
        tmp.write_text(json.dumps(doc), encoding="utf-8")
        os.replace(tmp, self._dir / SNAPSHOT_NAME)

    def close(self) -> None:
        with self._lock:
            self._write_snapshot()
            os.close(self._log_fd)

    # -- detections ----------------------------------------------------------

    def record_run(
        self, series_id: str, run_fingerprint: str, result_doc: dict, indices: list[int]
    ) -> list[Detection]:
        """Store one run; idempotent per (series, fingerprint)."""
        with self._lock:
            key = _run_key(series_id, run_fingerprint)
            existing = self._state.runs.get(key)
            if existing is not None:
                return [
                    self._state.detections[i] for i in existing["detection_ids"]
                ]
            removed_at = {
                d.index
                for d in self._state.detections.values()
                if d.series_id == series_id and d.status is VerdictStatus.REMOVED
            }
            created_at = _now()
            detections = [
                Detection(
                    # URL-safe: these ids travel in request paths.
                    detection_id=f"{series_id}~{index}~{run_fingerprint[:12]}",
                    series_id=series_id,
                    index=index,
                    run_fingerprint=run_fingerprint,
                    created_at=created_at,
                    previously_removed=index in removed_at,
                )
                for index in indices
            ]
            self._append(
                {
                    "type": "run",
                    "series_id": series_id,
                    "run_fingerprint": run_fingerprint,
                    "result": result_doc,
                    "detections": [d.to_dict() for d in detections],
                }
            )
            return detections

    def get_run(self, series_id: str, run_fingerprint: str) -> dict | None:
        with self._lock:
            return self._state.runs.get(_run_key(series_id, run_fingerprint))

    def get_detection(self, detection_id: str) -> Detection:
        with self._lock:
            det = self._state.detections.get(detection_id)
            if det is None:
                raise NotFoundError(f"no detection {detection_id!r}")
            return det

    def list_detections(
        self, series_id: str | None = None, status: VerdictStatus | None = None
    ) -> list[Detection]:
        with self._lock:
            rows = [
                d
                for d in self._state.detections.values()
                if (series_id is None or d.series_id == series_id)
                and (status is None or d.status is status)
            ]
        return sorted(rows, key=lambda d: (d.series_id, d.index, d.detection_id))

    def submit_verdict(
        self,
        detection_id: str,
        status: VerdictStatus,
        modified_index: int | None,
        annotator: str,
        series_length: int,
    ) -> Detection:
        with self._lock:
            det = self.get_detection(detection_id)
            if status is VerdictStatus.PENDING:
                raise ValidationError(
                    "a verdict cannot reset a detection to pending"
                )
            if det.status in DECIDED and status not in DECIDED:
                raise ValidationError("decided detections may only be re-decided")
            if status is VerdictStatus.MODIFIED:
                if modified_index is None:
                    raise ValidationError("status 'modified' requires modified_index")
                if not 1 <= modified_index <= series_length - 1:
                    raise ValidationError(
                        f"modified_index {modified_index} outside [1, {series_length - 1}]"
                    )
            elif modified_index is not None:
                raise ValidationError(
                    "modified_index is only valid with status 'modified'"
                )
            self._append(
                {
                    "type": "verdict",
                    "detection_id": detection_id,
                    "status": status.value,
                    "modified_index": modified_index,
                    "annotator": annotator,
                }
            )
            return self.get_detection(detection_id)

    # -- config versions -----------------------------------------------------

    def versions(self) -> list[ConfigVersion]:
        with self._lock:
            return list(self._state.versions)

    def active_version(self) -> ConfigVersion:
        with self._lock:
            if not self._state.versions:
                raise NotFoundError("no config version installed")
            return self._state.versions[-1]

    def add_config_version(
        self, config_doc: dict, source: str, tune_report: dict | None = None
    ) -> ConfigVersion:
        with self._lock:
            version = (
                self._state.versions[-1].version + 1 if self._state.versions else 1
            )
            self._append(
                {
                    "type": "config",
                    "version": version,
                    "config": config_doc,
                    "source": source,
                    "tune_report": tune_report,
                }
            )
            return self._state.versions[-1]
