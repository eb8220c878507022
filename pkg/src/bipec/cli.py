"""Operator command line: detect, evaluate, tune, import, synthesize, bench, serve.

Exit codes are part of the contract: 0 success, 1 for bad input (flags,
config files, malformed data), 2 for runtime failures.  Machine-readable
outputs sort by series id so runs can be diffed.
"""

from __future__ import annotations

import csv
import json
import resource
import sys
import time
from pathlib import Path

import click

from . import __version__
from .data import (
    AnnotationSet,
    ChangePointSet,
    Dataset,
    generate_quality_control,
    load_dataset,
    save_dataset,
)
from .errors import (
    ArgumentError,
    BipecError,
    ConflictError,
    NotFoundError,
    ParseError,
    PreconditionError,
    ValidationError,
)
from .metrics import EvalConfig, evaluate_dataset
from .pipeline import (
    DETECTORS,
    BipecConfig,
    DetectionResult,
    config_fingerprint,
    config_from_dict,
    detect_batch,
)
from .tcpd import import_tcpd
from .tuning import SearchSpace, tune

_INPUT_ERRORS = (
    ParseError,
    ValidationError,
    ArgumentError,
    ConflictError,
    NotFoundError,
    PreconditionError,
    FileNotFoundError,
)


def _load_config(path: str | None) -> BipecConfig:
    if path is None:
        return BipecConfig()
    p = Path(path)
    if not p.is_file():
        raise ParseError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: invalid JSON: {exc}") from exc
    return config_from_dict(doc, origin=str(p))


def _write_json(path: str, doc) -> None:
    Path(path).write_text(
        json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )


@click.group()
@click.version_option(__version__)
def cli() -> None:
    """Change-point detection toolkit for performance-test time series."""


@cli.command("detect")
@click.option("--data", "data_dir", required=True, help="dataset directory")
@click.option("--config", "config_path", default=None, help="pipeline config JSON")
@click.option("--out", "out_path", required=True, help="output results JSON")
@click.option(
    "--baseline",
    type=click.Choice(["pelt", "bayes"]),
    default=None,
    help="swap the two-stage detector for a single-stage baseline",
)
@click.option("--workers", default=1, show_default=True, help="parallel series workers")
def cmd_detect(data_dir, config_path, out_path, baseline, workers):
    """Run detection over a dataset and write one result per series."""
    config = _load_config(config_path)
    ds = load_dataset(data_dir)
    method = baseline or "bipec"
    batch = detect_batch(ds, config, max_workers=workers, method=method)
    doc = {
        "method": method,
        "config_fingerprint": config_fingerprint(config),
        "results": {
            sid: batch.results[sid].to_dict() for sid in sorted(batch.results)
        },
        "errors": {sid: batch.errors[sid] for sid in sorted(batch.errors)},
    }
    _write_json(out_path, doc)
    click.echo(
        f"detected {sum(len(r.final) for r in batch.results.values())} change points "
        f"in {len(batch.results)} series ({len(batch.errors)} failed) -> {out_path}"
    )


def _predictions_from_file(path: str) -> dict[str, ChangePointSet]:
    p = Path(path)
    if not p.is_file():
        raise ParseError(f"predictions file not found: {p}")
    doc = json.loads(p.read_text(encoding="utf-8"))
    results = doc.get("results", doc)
    preds = {}
    for sid, entry in results.items():
        indices = entry["final"] if isinstance(entry, dict) else entry
        preds[sid] = ChangePointSet.from_indices(sid, indices)
    return preds


@cli.command("eval")
@click.option("--pred", "pred_path", required=True, help="detect output JSON")
@click.option("--data", "data_dir", required=True, help="annotated dataset directory")
@click.option("--margin", default=5, show_default=True, help="match tolerance M")
@click.option("--include-origin", type=bool, default=False, show_default=True)
@click.option("--consensus-k", default=1, show_default=True)
@click.option("--out", "out_path", default=None, help="write JSON report")
@click.option("--csv", "csv_path", default=None, help="write per-series CSV")
def cmd_eval(pred_path, data_dir, margin, include_origin, consensus_k, out_path, csv_path):
    """Score predictions against dataset annotations."""
    preds = _predictions_from_file(pred_path)
    ds = load_dataset(data_dir)
    cfg = EvalConfig(margin=margin, include_origin=include_origin, consensus_k=consensus_k)
    report = evaluate_dataset(preds, ds, cfg)

    header = f"{'series':<40} {'tp':>4} {'pred':>5} {'truth':>5} {'prec':>7} {'recall':>7} {'f1':>7}"
    click.echo(header)
    click.echo("-" * len(header))
    for row in report.per_series:
        click.echo(
            f"{row.series_id:<40.40} {row.tp:>4} {row.predicted_count:>5} "
            f"{row.truth_count:>5} {row.precision:>7.4f} {row.recall:>7.4f} {row.f1:>7.4f}"
        )
    click.echo("-" * len(header))
    click.echo(
        f"{'macro':<40} {'':>4} {'':>5} {'':>5} "
        f"{report.macro_precision:>7.4f} {report.macro_recall:>7.4f} {report.macro_f1:>7.4f}"
    )
    if out_path:
        _write_json(out_path, report.to_dict())
    if csv_path:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["series_id", "tp", "predicted", "truth", "precision", "recall", "f1"]
            )
            for row in report.per_series:
                writer.writerow(
                    [
                        row.series_id,
                        row.tp,
                        row.predicted_count,
                        row.truth_count,
                        row.precision,
                        row.recall,
                        row.f1,
                    ]
                )


@cli.command("tune")
@click.option("--data", "data_dir", required=True, help="annotated dataset directory")
@click.option("--budget", default=50, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--margin", default=5, show_default=True)
@click.option("--include-origin", type=bool, default=False, show_default=True)
@click.option("--consensus-k", default=1, show_default=True)
@click.option("--out", "out_path", default=None, help="write TuneReport JSON")
def cmd_tune(data_dir, budget, seed, margin, include_origin, consensus_k, out_path):
    """Seeded random search maximizing F1 (precision tie-break)."""
    ds = load_dataset(data_dir)
    eval_cfg = EvalConfig(margin=margin, include_origin=include_origin, consensus_k=consensus_k)
    report = tune(ds, SearchSpace(), budget=budget, seed=seed, eval_cfg=eval_cfg)

    click.echo(f"{'rank':>4} {'fingerprint':<18} {'f1':>8} {'precision':>10}")
    ranked = sorted(
        enumerate(report.trials), key=lambda kv: (-kv[1].f1, -kv[1].precision, kv[0])
    )
    for rank, (i, trial) in enumerate(ranked[:10], start=1):
        click.echo(
            f"{rank:>4} {trial.fingerprint:<18} {trial.f1:>8.4f} {trial.precision:>10.4f}"
        )
    click.echo(
        f"best f1={report.best_f1:.4f} precision={report.best_precision:.4f} "
        f"fingerprint={config_fingerprint(report.best)}"
    )
    if out_path:
        _write_json(out_path, report.to_dict())


@cli.command("import-tcpd")
@click.option("--src", "src_dir", required=True, help="TCPD-format corpus directory")
@click.option("--out", "out_dir", required=True, help="canonical dataset directory")
def cmd_import_tcpd(src_dir, out_dir):
    """Convert a TCPD-format corpus to the canonical dataset layout."""
    ds = import_tcpd(src_dir)
    save_dataset(ds, out_dir)
    click.echo(
        f"imported {len(ds.series)} series, "
        f"{len(ds.annotations)} annotation sets -> {out_dir}"
    )


@cli.command("synth")
@click.option("--spec", "spec_path", required=True, help="JSON [[len, mean, std], ...]")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", required=True, help="dataset directory to create")
@click.option("--name", default=None, help="series id override")
def cmd_synth(spec_path, seed, out_dir, name):
    """Generate a quality-control series with known change points."""
    p = Path(spec_path)
    if not p.is_file():
        raise ParseError(f"spec file not found: {p}")
    doc = json.loads(p.read_text(encoding="utf-8"))
    segments = doc["segments"] if isinstance(doc, dict) else doc
    series, truth = generate_quality_control(
        [tuple(seg) for seg in segments], seed=seed
    )
    if name:
        import dataclasses

        series = dataclasses.replace(series, id=name, name=name)
        truth = ChangePointSet(name, truth.indices)
    ds = Dataset(
        name="synthetic",
        series=(series,),
        annotations=(AnnotationSet(series.id, "truth", truth),),
    )
    save_dataset(ds, out_dir)
    click.echo(f"wrote {series.id} (n={len(series)}, truth={list(truth.indices)}) -> {out_dir}")


@cli.command("bench")
@click.option("--data", "data_dir", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--repeat", default=10, show_default=True, help="runs per method")
@click.option("--out", "out_path", default=None, help="write timings JSON")
def cmd_bench(data_dir, config_path, repeat, out_path):
    """Time each detector over the dataset; single-threaded measurements."""
    config = _load_config(config_path)
    ds = load_dataset(data_dir)
    rows = []
    for method in ("bipec", "pelt", "bayes"):
        detector = DETECTORS[method]
        elapsed = []
        fail = 0
        for _ in range(repeat):
            t0 = time.perf_counter()
            for series in ds.series:
                try:
                    detector(series, config)
                except BipecError:
                    fail += 1
            elapsed.append(time.perf_counter() - t0)
        peak_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        rows.append(
            {
                "method": method,
                "repeat": repeat,
                "series": len(ds.series),
                "mean_time_s": sum(elapsed) / len(elapsed),
                "peak_rss_kb": peak_kb,
                "failures": fail,
            }
        )
    click.echo(f"{'method':<8} {'mean_time_s':>12} {'peak_rss_kb':>12}")
    for row in rows:
        click.echo(
            f"{row['method']:<8} {row['mean_time_s']:>12.4f} {row['peak_rss_kb']:>12}"
        )
    if out_path:
        _write_json(out_path, {"rows": rows})


@cli.command("serve")
@click.option("--data", "data_dir", required=True, help="dataset directory")
@click.option("--store", "store_dir", required=True, help="verdict store directory")
@click.option("--config", "config_path", default=None, help="initial pipeline config")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--ui", "ui_dir", default=None, help="built review-client asset directory")
@click.option("--token", default=None, help="require X-Api-Token on /api routes")
def cmd_serve(data_dir, store_dir, config_path, host, port, ui_dir, token):
    """Run the feedback service until shutdown."""
    from .service import serve

    config = _load_config(config_path)
    serve(
        f"{host}:{port}",
        data_dir,
        store_dir,
        initial_config=config,
        ui_dir=ui_dir,
        token=token,
    )


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except _INPUT_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except BipecError as exc:
        click.echo(f"runtime failure: {exc}", err=True)
        return 2
    except Exception as exc:  # anything else is a runtime failure
        click.echo(f"runtime failure: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
