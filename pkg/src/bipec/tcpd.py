"""Import of TCPD-style change-point corpora.

Each per-series file is JSON with ``name``, ``n_obs`` and a ``series`` array
of value columns (``series[].raw``).  Multivariate sources are split into one
univariate :class:`~bipec.data.TimeSeries` per column, with the column label
suffixed to the id, because all detectors here are univariate.  An optional
``annotations.json`` maps series name -> annotator -> list of indices.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path

from .data import AnnotationSet, ChangePointSet, Dataset, TimeSeries
from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)

ANNOTATIONS_NAME = "annotations.json"

_KNOWN_FIELDS = {"name", "longname", "n_obs", "n_dim", "time", "series"}
_KNOWN_COLUMN_FIELDS = {"label", "type", "raw"}


def _column_values(raw: list, origin: str) -> tuple[tuple[float, ...], frozenset[int]]:
    values: list[float] = []
    missing: set[int] = set()
    for i, v in enumerate(raw):
        if v is None or (isinstance(v, str) and v.strip().upper() in {"", "NA", "NAN"}):
            missing.add(i)
            values.append(math.nan)
        else:
            try:
                f = float(v)
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{origin}: non-numeric token {v!r} at raw[{i}]") from exc
            if math.isnan(f):
                missing.add(i)
            values.append(f)
    return tuple(values), frozenset(missing)


def _import_file(fpath: Path) -> list[TimeSeries]:
    try:
        doc = json.loads(fpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{fpath}: invalid JSON: {exc}") from exc

    for key in ("name", "n_obs", "series"):
        if key not in doc:
            raise ParseError(f"{fpath}: missing field {key!r}")
    for key in doc:
        if key not in _KNOWN_FIELDS:
            log.warning("%s: ignoring unknown field %r", fpath, key)

    name = str(doc["name"])
    n_obs = int(doc["n_obs"])
    columns = doc["series"]
    if not isinstance(columns, list) or not columns:
        raise ParseError(f"{fpath}: 'series' must be a non-empty array of columns")

    multivariate = len(columns) > 1
    out = []
    for d, col in enumerate(columns):
        if "raw" not in col:
            raise ParseError(f"{fpath}: series[{d}] missing 'raw'")
        for key in col:
            if key not in _KNOWN_COLUMN_FIELDS:
                log.warning("%s: ignoring unknown column field %r", fpath, key)
        values, missing = _column_values(col["raw"], f"{fpath}:series[{d}]")
        if len(values) != n_obs:
            raise ValidationError(
                f"{fpath}: series[{d}] has {len(values)} values but n_obs={n_obs}"
            )
        label = str(col.get("label", str(d)))
        sid = f"{name}:{label}" if multivariate else name
        out.append(
            TimeSeries(
                id=sid,
                name=sid,
                values=values,
                missing=missing,
                meta={"source": "tcpd", "dataset": name, "column": label},
            )
        )
    return out


def import_tcpd(dir: str | Path) -> Dataset:
    """Import a directory of TCPD-format series files as a Dataset."""
    root = Path(dir)
    if not root.is_dir():
        raise ParseError(f"{root}: not a directory")

    all_series: list[TimeSeries] = []
    by_source: dict[str, list[TimeSeries]] = {}
    for fpath in sorted(root.rglob("*.json")):
        if fpath.name == ANNOTATIONS_NAME:
            continue
        imported = _import_file(fpath)
        all_series.extend(imported)
        by_source.setdefault(imported[0].meta["dataset"], []).extend(imported)

    annotations: list[AnnotationSet] = []
    ann_path = root / ANNOTATIONS_NAME
    if ann_path.is_file():
        try:
            ann_doc = json.loads(ann_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{ann_path}: invalid JSON: {exc}") from exc
        for source_name, per_annotator in ann_doc.items():
            members = by_source.get(source_name)
            if members is None:
                log.warning("%s: annotations for unknown series %r", ann_path, source_name)
                continue
            for annotator, indices in per_annotator.items():
                # Annotations are per source series; attach to every split column.
                for series in members:
                    points = ChangePointSet.from_indices(series.id, indices)
                    points.validate_for(series)
                    annotations.append(AnnotationSet(series.id, str(annotator), points))

    return Dataset(name=root.name, series=tuple(all_series), annotations=tuple(annotations))
