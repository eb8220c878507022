"""HTTP surface of the feedback service.

All bodies are JSON; errors use the envelope ``{"error": ..., "detail": ...}``.
An optional static token gates every /api route when configured.  The review
client is served from /ui when a built asset directory is supplied.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import Depends, FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..data import Dataset, load_dataset
from ..errors import (
    ArgumentError,
    BipecError,
    NotFoundError,
    ParseError,
    PreconditionError,
    ValidationError,
)
from ..metrics import EvalConfig
from ..pipeline import BipecConfig
from .core import FeedbackService
from .store import EventLogStore, VerdictStatus

_STATUS_CODES = (
    (NotFoundError, 404),
    (PreconditionError, 409),
    (ValidationError, 400),
    (ArgumentError, 400),
    (ParseError, 400),
    (BipecError, 400),
)


class VerdictBody(BaseModel):
    status: str
    modified_index: int | None = None
    annotator: str


class RetuneBody(BaseModel):
    budget: int = 20
    seed: int = 0


def create_app(
    dataset: Dataset | str | Path,
    store_dir: str | Path,
    initial_config: BipecConfig = BipecConfig(),
    eval_cfg: EvalConfig = EvalConfig(),
    ui_dir: str | Path | None = None,
    token: str | None = None,
) -> FastAPI:
    if not isinstance(dataset, Dataset):
        dataset = load_dataset(dataset)
    store = EventLogStore(store_dir)
    service = FeedbackService(dataset, store, initial_config, eval_cfg)

    def check_token(request: Request) -> None:
        if token is not None and request.headers.get("x-api-token") != token:
            raise PermissionError("missing or invalid X-Api-Token header")

    app = FastAPI(title="change-point review service", dependencies=[Depends(check_token)])
    app.state.service = service
    app.state.store = store

    @app.exception_handler(PermissionError)
    async def _perm(request: Request, exc: PermissionError):
        return JSONResponse(
            status_code=401, content={"error": "unauthorized", "detail": str(exc)}
        )

    @app.exception_handler(BipecError)
    async def _bipec(request: Request, exc: BipecError):
        for klass, code in _STATUS_CODES:
            if isinstance(exc, klass):
                return JSONResponse(
                    status_code=code,
                    content={"error": klass.__name__, "detail": str(exc)},
                )
        raise exc  # pragma: no cover

    @app.exception_handler(RequestValidationError)
    async def _reqval(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": "invalid_request", "detail": str(exc.errors())},
        )

    @app.get("/api/series")
    def list_series():
        return service.series_summaries()

    @app.get("/api/series/{series_id}")
    def series_detail(series_id: str):
        return service.series_detail(series_id)

    @app.post("/api/series/{series_id}/detect")
    def run_detection(series_id: str):
        detections, result = service.run_detection(series_id)
        return {"detections": [d.to_dict() for d in detections], "result": result}

    @app.get("/api/detections")
    def list_detections(
        series: str | None = Query(default=None),
        status: str | None = Query(default=None),
    ):
        status_filter = None
        if status is not None:
            try:
                status_filter = VerdictStatus(status)
            except ValueError:
                raise ValidationError(f"unknown status {status!r}") from None
        rows = service.store.list_detections(series, status_filter)
        return [d.to_dict() for d in rows]

    @app.post("/api/detections/{detection_id}/verdict")
    def submit_verdict(detection_id: str, body: VerdictBody):
        try:
            status = VerdictStatus(body.status)
        except ValueError:
            raise ValidationError(f"unknown status {body.status!r}") from None
        detection = service.submit_verdict(
            detection_id, status, body.modified_index, body.annotator
        )
        return detection.to_dict()

    @app.get("/api/labels/export")
    def export_labels():
        labels = service.export_labels()
        return {
            "name": labels.name,
            "series": [
                {
                    "id": s.id,
                    "name": s.name,
                    "values": [
                        None if i in s.missing else v for i, v in enumerate(s.values)
                    ],
                    "meta": dict(s.meta),
                    "annotations": [
                        {"annotator": a.annotator_id, "indices": list(a.points.indices)}
                        for a in labels.annotations_for(s.id)
                    ],
                }
                for s in labels.series
            ],
        }

    @app.post("/api/retune")
    def retune(body: RetuneBody):
        return service.retune(budget=body.budget, seed=body.seed)

    @app.get("/api/config/versions")
    def config_versions():
        return [v.to_dict(with_tune_report=False) for v in service.store.versions()]

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(
    bind_address: str,
    dataset_dir: str | Path,
    store_dir: str | Path,
    initial_config: BipecConfig = BipecConfig(),
    ui_dir: str | Path | None = None,
    token: str | None = None,
) -> None:
    """Run the HTTP service until shutdown."""
    import uvicorn

    host, _, port = bind_address.partition(":")
    app = create_app(
        dataset_dir,
        store_dir,
        initial_config=initial_config,
        ui_dir=ui_dir,
        token=token,
    )
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="info")
