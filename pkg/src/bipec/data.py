"""Canonical time-series data model and on-disk dataset format.

A dataset directory holds one JSON file per series plus a ``manifest.json``
listing the member files.  Each series file carries the value array (``null``
encodes a missing observation), free-form string metadata, and zero or more
embedded annotation blocks.  Series files are self-contained so the feedback
service can add series incrementally without rewriting the directory.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ArgumentError, ConflictError, ParseError, ValidationError

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class TimeSeries:
    """One univariate performance-metric series.

    ``values[i]`` is meaningless for ``i in missing``; missing observations
    are retained (never interpolated) so the raw data stays auditable.
    """

    id: str
    name: str
    values: tuple[float, ...]
    missing: frozenset[int] = frozenset()
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.values)
        for i in self.missing:
            if not 0 <= i < n:
                raise ValidationError(
                    f"series {self.id!r}: missing index {i} outside 0..{n - 1}"
                )
        for i, v in enumerate(self.values):
            if i not in self.missing and not math.isfinite(v):
                raise ValidationError(
                    f"series {self.id!r}: non-finite value {v!r} at index {i}"
                )

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ChangePointSet:
    """Sorted, deduplicated change-point indices for one series.

    Used both for predictions and for ground truth.  ``includes_origin``
    records whether index 0 is present by convention (the origin-inclusion
    evaluation mode) rather than as a detected change.
    """

    series_id: str
    indices: tuple[int, ...]
    includes_origin: bool = False

    def __post_init__(self) -> None:
        for a, b in zip(self.indices, self.indices[1:]):
            if b <= a:
                raise ValidationError(
                    f"change points for {self.series_id!r} not strictly ascending: "
                    f"{a} then {b}"
                )
        if self.indices and self.indices[0] < 0:
            raise ValidationError(
                f"change point {self.indices[0]} negative for {self.series_id!r}"
            )

    @classmethod
    def from_indices(
        cls, series_id: str, indices, includes_origin: bool = False
    ) -> "ChangePointSet":
        return cls(series_id, tuple(sorted(set(int(i) for i in indices))), includes_origin)

    def validate_for(self, series: TimeSeries) -> None:
        n = len(series)
        for i in self.indices:
            if i == 0:
                continue
            if not 1 <= i <= n - 1:
                raise ValidationError(
                    f"change point {i} out of range [1, {n - 1}] for series "
                    f"{series.id!r}"
                )

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class AnnotationSet:
    """Change points one annotator assigned to one series."""

    series_id: str
    annotator_id: str
    points: ChangePointSet


@dataclass(frozen=True)
class Dataset:
    name: str
    series: tuple[TimeSeries, ...]
    annotations: tuple[AnnotationSet, ...] = ()

    def __post_init__(self) -> None:
        ids = [s.id for s in self.series]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise ConflictError(f"duplicate series ids: {sorted(dupes)}")
        known = set(ids)
        for ann in self.annotations:
            if ann.series_id not in known:
                raise ValidationError(
                    f"annotation by {ann.annotator_id!r} references unknown series "
                    f"{ann.series_id!r}"
                )
        seen = set()
        for ann in self.annotations:
            key = (ann.series_id, ann.annotator_id)
            if key in seen:
                raise ConflictError(
                    f"multiple annotation sets for series {key[0]!r} by {key[1]!r}"
                )
            seen.add(key)

    def series_by_id(self, series_id: str) -> TimeSeries:
        for s in self.series:
            if s.id == series_id:
                return s
        raise KeyError(series_id)

    def annotations_for(self, series_id: str) -> list[AnnotationSet]:
        return [a for a in self.annotations if a.series_id == series_id]


def _series_to_doc(series: TimeSeries, annotations: list[AnnotationSet]) -> dict:
    values = [None if i in series.missing else v for i, v in enumerate(series.values)]
    return {
        "id": series.id,
        "name": series.name,
        "values": values,
        "meta": dict(series.meta),
        "annotations": [
            {"annotator": a.annotator_id, "indices": list(a.points.indices)}
            for a in annotations
        ],
    }


def _series_from_doc(doc: dict, origin: str) -> tuple[TimeSeries, list[AnnotationSet]]:
    for key in ("id", "name", "values"):
        if key not in doc:
            raise ParseError(f"{origin}: missing field {key!r}")
    raw_values = doc["values"]
    if not isinstance(raw_values, list):
        raise ParseError(f"{origin}: field 'values' must be an array")
    values: list[float] = []
    missing: set[int] = set()
    for i, v in enumerate(raw_values):
        if v is None:
            missing.add(i)
            values.append(math.nan)
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            values.append(float(v))
        else:
            raise ParseError(f"{origin}: non-numeric token {v!r} at values[{i}]")
    meta = doc.get("meta", {})
    if not isinstance(meta, dict) or any(
        not isinstance(k, str) or not isinstance(v, str) for k, v in meta.items()
    ):
        raise ParseError(f"{origin}: field 'meta' must map strings to strings")
    try:
        series = TimeSeries(
            id=str(doc["id"]),
            name=str(doc["name"]),
            values=tuple(values),
            missing=frozenset(missing),
            meta=dict(meta),
        )
    except ValidationError as exc:
        raise ValidationError(f"{origin}: {exc}") from exc

    annotations = []
    for block in doc.get("annotations", []):
        if "annotator" not in block or "indices" not in block:
            raise ParseError(f"{origin}: annotation block needs 'annotator' and 'indices'")
        points = ChangePointSet.from_indices(series.id, block["indices"])
        try:
            points.validate_for(series)
        except ValidationError as exc:
            raise ValidationError(f"{origin}: {exc}") from exc
        annotations.append(
            AnnotationSet(series.id, str(block["annotator"]), points)
        )
    return series, annotations


def _filename_for(series_id: str, taken: set[str]) -> str:
    stem = re.sub(r"[^A-Za-z0-9._-]+", "_", series_id) or "series"
    name = f"{stem}.json"
    k = 1
    while name in taken:
        name = f"{stem}_{k}.json"
        k += 1
    taken.add(name)
    return name


def save_dataset(ds: Dataset, path: str | Path) -> None:
    """Write ``ds`` so that :func:`load_dataset` reproduces it exactly."""
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create dataset directory {root}: {exc}") from exc
    taken: set[str] = {MANIFEST_NAME}
    files = []
    for series in ds.series:
        fname = _filename_for(series.id, taken)
        doc = _series_to_doc(series, ds.annotations_for(series.id))
        try:
            (root / fname).write_text(json.dumps(doc, indent=1), encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {root / fname}: {exc}") from exc
        files.append(fname)
    manifest = {"name": ds.name, "series_files": files}
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1), encoding="utf-8")


def load_dataset(path: str | Path) -> Dataset:
    """Load a dataset directory written by :func:`save_dataset`."""
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ParseError(f"{root}: no {MANIFEST_NAME} found")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{manifest_path}: invalid JSON: {exc}") from exc
    if "name" not in manifest or "series_files" not in manifest:
        raise ParseError(f"{manifest_path}: manifest needs 'name' and 'series_files'")

    all_series: list[TimeSeries] = []
    all_annotations: list[AnnotationSet] = []
    for fname in manifest["series_files"]:
        fpath = root / fname
        try:
            doc = json.loads(fpath.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ParseError(f"{fpath}: cannot read: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"{fpath}: invalid JSON: {exc}") from exc
        series, annotations = _series_from_doc(doc, str(fpath))
        all_series.append(series)
        all_annotations.extend(annotations)
    return Dataset(
        name=str(manifest["name"]),
        series=tuple(all_series),
        annotations=tuple(all_annotations),
    )


def generate_quality_control(
    spec: list[tuple[int, float, float]], seed: int
) -> tuple[TimeSeries, ChangePointSet]:
    """Generate a piecewise-stationary Gaussian series with known change points.

    ``spec`` lists ``(segment_length, mean, stddev)`` per segment.  The truth
    set is the cumulative segment boundaries, excluding 0 and the series end.
    Identical ``(spec, seed)`` always produce identical output.
    """
    import numpy as np

    if not spec:
        raise ArgumentError("quality-control spec needs at least one segment")
    for seg in spec:
        length, _, stddev = seg
        if int(length) < 1:
            raise ArgumentError(f"segment length must be >= 1, got {length}")
        if stddev < 0:
            raise ArgumentError(f"segment stddev must be >= 0, got {stddev}")

    rng = np.random.default_rng(seed)
    chunks = []
    boundaries = []
    total = 0
    for length, mean, stddev in spec:
        length = int(length)
        chunks.append(rng.normal(loc=mean, scale=stddev, size=length))
        total += length
        boundaries.append(total)
    values = np.concatenate(chunks)
    truth = [b for b in boundaries[:-1]]

    sid = f"qc-seed{seed}-" + "-".join(
        f"{int(l)}at{m:g}s{s:g}" for l, m, s in spec
    )
    series = TimeSeries(
        id=sid,
        name=sid,
        values=tuple(float(v) for v in values),
        meta={"source": "synthetic", "kind": "quality-control", "seed": str(seed)},
    )
    return series, ChangePointSet.from_indices(sid, truth)
