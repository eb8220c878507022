import json
import threading

import pytest
from fastapi.testclient import TestClient

from bipec.data import (
    AnnotationSet,
    ChangePointSet,
    Dataset,
    generate_quality_control,
    save_dataset,
)
from bipec.errors import NotFoundError, PreconditionError, ValidationError
from bipec.pipeline import BipecConfig, detect
from bipec.service.app import create_app
from bipec.service.core import FeedbackService
from bipec.service.store import EventLogStore, VerdictStatus


def step_dataset(n_series=3):
    series = []
    for seed in range(n_series):
        s, _ = generate_quality_control([(80, 0.0, 1.0), (80, 5.0, 1.0)], seed=500 + seed)
        series.append(s)
    return Dataset("svc", tuple(series))


@pytest.fixture
def service(tmp_path):
    store = EventLogStore(tmp_path / "store")
    return FeedbackService(step_dataset(), store)


class TestStoreDurability:
    def test_verdicts_survive_unclean_restart(self, tmp_path, service):
        detections, _ = service.run_detection(service.dataset.series[0].id)
        assert detections
        det = detections[0]
        service.submit_verdict(det.detection_id, VerdictStatus.CONFIRMED, None, "alice")

        # No close(): simulate a kill by re-opening the directory cold.
        reloaded = EventLogStore(tmp_path / "store")
        got = reloaded.get_detection(det.detection_id)
        assert got.status is VerdictStatus.CONFIRMED
        assert got.annotator == "alice"

    def test_snapshot_plus_tail_replay(self, tmp_path):
        store = EventLogStore(tmp_path / "s", snapshot_every=3)
        svc = FeedbackService(step_dataset(1), store)
        dets, _ = svc.run_detection(svc.dataset.series[0].id)
        for det in dets:
            svc.submit_verdict(det.detection_id, VerdictStatus.CONFIRMED, None, "a")
        reloaded = EventLogStore(tmp_path / "s")
        assert {d.detection_id for d in reloaded.list_detections()} == {
            d.detection_id for d in dets
        }

    def test_torn_tail_line_ignored(self, tmp_path, service):
        service.run_detection(service.dataset.series[0].id)
        log = tmp_path / "store" / "events.log"
        with log.open("a") as fh:
            fh.write('{"seq": 999, "truncated')
        reloaded = EventLogStore(tmp_path / "store")
        assert reloaded.versions()  # state still loads


class TestRecordRun:
    def test_one_detection_per_final_point(self, service):
        sid = service.dataset.series[0].id
        detections, result = service.run_detection(sid)
        assert len(detections) == len(result["final"])
        assert all(d.status is VerdictStatus.PENDING for d in detections)

    def test_idempotent_recording(self, service):
        sid = service.dataset.series[0].id
        first, _ = service.run_detection(sid)
        second, _ = service.run_detection(sid)
        assert [d.detection_id for d in first] == [d.detection_id for d in second]
        assert len(service.store.list_detections(series_id=sid)) == len(first)

    def test_record_external_result_empty(self, service):
        constant, _ = generate_quality_control([(100, 1.0, 0.0)], seed=1)
        ds = Dataset("d2", (*service.dataset.series, constant))
        service.dataset = ds
        result = detect(constant)
        ids = service.record_run(constant.id, result)
        assert ids == []

    def test_unknown_series_rejected(self, service):
        with pytest.raises(NotFoundError):
            service.run_detection("ghost")

    def test_previously_removed_flagged_on_new_run(self, tmp_path):
        store = EventLogStore(tmp_path / "s2")
        svc = FeedbackService(step_dataset(1), store)
        sid = svc.dataset.series[0].id
        dets, _ = svc.run_detection(sid)
        svc.submit_verdict(dets[0].detection_id, VerdictStatus.REMOVED, None, "a")
        # same series re-recorded under a different fingerprint
        result = detect(svc.dataset.series[0], BipecConfig(merge_margin=4))
        ids = svc.record_run(sid, result)
        fresh = [store.get_detection(i) for i in ids]
        assert any(d.previously_removed for d in fresh)


class TestVerdicts:
    def test_confirm_sets_audit_fields(self, service):
        dets, _ = service.run_detection(service.dataset.series[0].id)
        got = service.submit_verdict(
            dets[0].detection_id, VerdictStatus.CONFIRMED, None, "alice"
        )
        assert got.status is VerdictStatus.CONFIRMED
        assert got.decided_at is not None
        assert got.annotator == "alice"

    def test_modify_with_valid_index(self, service):
        dets, _ = service.run_detection(service.dataset.series[0].id)
        got = service.submit_verdict(
            dets[0].detection_id, VerdictStatus.MODIFIED, 150, "bob"
        )
        assert got.modified_index == 150

    def test_modify_out_of_range_rejected(self, service):
        dets, _ = service.run_detection(service.dataset.series[0].id)
        with pytest.raises(ValidationError):
            service.submit_verdict(
                dets[0].detection_id, VerdictStatus.MODIFIED, 160, "bob"
            )

    def test_modify_requires_index(self, service):
        dets, _ = service.run_detection(service.dataset.series[0].id)
        with pytest.raises(ValidationError):
            service.submit_verdict(dets[0].detection_id, VerdictStatus.MODIFIED, None, "b")

    def test_cannot_reset_to_pending(self, service):
        dets, _ = service.run_detection(service.dataset.series[0].id)
        service.submit_verdict(dets[0].detection_id, VerdictStatus.CONFIRMED, None, "a")
        with pytest.raises(ValidationError):
            service.submit_verdict(dets[0].detection_id, VerdictStatus.PENDING, None, "a")

    def test_re_adjudication_allowed(self, service):
        dets, _ = service.run_detection(service.dataset.series[0].id)
        service.submit_verdict(dets[0].detection_id, VerdictStatus.CONFIRMED, None, "a")
        got = service.submit_verdict(
            dets[0].detection_id, VerdictStatus.REMOVED, None, "b"
        )
        assert got.status is VerdictStatus.REMOVED

    def test_unknown_detection(self, service):
        with pytest.raises(NotFoundError):
            service.submit_verdict("nope", VerdictStatus.CONFIRMED, None, "a")

    def test_concurrent_verdicts_on_distinct_detections(self, tmp_path):
        store = EventLogStore(tmp_path / "s3")
        svc = FeedbackService(step_dataset(3), store)
        all_dets = []
        for s in svc.dataset.series:
            dets, _ = svc.run_detection(s.id)
            all_dets.extend(dets)
        assert len(all_dets) >= 2

        def confirm(det):
            svc.submit_verdict(det.detection_id, VerdictStatus.CONFIRMED, None, "t")

        threads = [threading.Thread(target=confirm, args=(d,)) for d in all_dets]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        confirmed = store.list_detections(status=VerdictStatus.CONFIRMED)
        assert len(confirmed) == len(all_dets)


class TestExportLabels:
    def test_confirmed_and_removed(self, service):
        sid = service.dataset.series[0].id
        dets, _ = service.run_detection(sid)
        service.submit_verdict(dets[0].detection_id, VerdictStatus.CONFIRMED, None, "a")
        labels = service.export_labels()
        ann = labels.annotations_for(sid)[0]
        assert ann.annotator_id == "verified"
        assert ann.points.indices == (dets[0].index,)

    def test_modified_exports_new_index(self, service):
        sid = service.dataset.series[0].id
        dets, _ = service.run_detection(sid)
        service.submit_verdict(dets[0].detection_id, VerdictStatus.MODIFIED, 83, "a")
        labels = service.export_labels()
        assert labels.annotations_for(sid)[0].points.indices == (83,)

    def test_pure_removal_gives_empty_annotation(self, service):
        sid = service.dataset.series[0].id
        dets, _ = service.run_detection(sid)
        service.submit_verdict(dets[0].detection_id, VerdictStatus.REMOVED, None, "a")
        labels = service.export_labels()
        assert labels.annotations_for(sid)[0].points.indices == ()

    def test_all_pending_excluded(self, service):
        service.run_detection(service.dataset.series[0].id)
        labels = service.export_labels()
        assert labels.series == ()


class TestRetune:
    def test_no_labels_is_precondition_error(self, service):
        with pytest.raises(PreconditionError):
            service.retune(budget=2, seed=0)

    def test_round_trip_installs_no_worse_version(self, tmp_path):
        store = EventLogStore(tmp_path / "rt")
        svc = FeedbackService(step_dataset(4), store)
        for s in svc.dataset.series:
            dets, _ = svc.run_detection(s.id)
            for det in dets:
                svc.submit_verdict(det.detection_id, VerdictStatus.CONFIRMED, None, "a")
        outcome = svc.retune(budget=5, seed=1)
        assert outcome["candidate"]["f1"] >= outcome["incumbent"]["f1"]
        if outcome["outcome"] == "accepted":
            assert store.active_version().version == 2
            assert store.active_version().source == "retune"
        else:
            assert store.active_version().version == 1

    def test_retained_when_search_cannot_beat_incumbent(self, tmp_path):
        # A confirmed big step plus a removed small step: only a large
        # penalty scores 1.0.  A later budget-1 retune (defaults probe only)
        # must leave that incumbent in place.
        import math

        from bipec.data import TimeSeries

        def mk(sid, delta):
            vals = [
                (0.0 if i < 80 else delta)
                + 0.35 * math.sin(i * 0.7)
                + 0.21 * math.cos(i * 2.3)
                for i in range(160)
            ]
            return TimeSeries(id=sid, name=sid, values=tuple(vals))

        ds = Dataset("mix", (mk("big", 5.0), mk("small", 1.0)))
        store = EventLogStore(tmp_path / "ret")
        svc = FeedbackService(ds, store)
        for sid, verdict in (("big", VerdictStatus.CONFIRMED), ("small", VerdictStatus.REMOVED)):
            dets, _ = svc.run_detection(sid)
            for det in dets:
                svc.submit_verdict(det.detection_id, verdict, None, "e2e")

        first = svc.retune(budget=12, seed=3)
        assert first["outcome"] == "accepted"
        assert first["candidate"]["f1"] > first["incumbent"]["f1"]
        assert store.active_version().version == 2

        second = svc.retune(budget=1, seed=0)
        assert second["outcome"] == "retained"
        assert store.active_version().version == 2  # incumbent kept

    def test_deterministic_retune(self, tmp_path):
        results = []
        for run in range(2):
            store = EventLogStore(tmp_path / f"det{run}")
            svc = FeedbackService(step_dataset(2), store)
            for s in svc.dataset.series:
                dets, _ = svc.run_detection(s.id)
                for det in dets:
                    svc.submit_verdict(
                        det.detection_id, VerdictStatus.CONFIRMED, None, "a"
                    )
            outcome = svc.retune(budget=4, seed=42)
            results.append(json.dumps(outcome["version"]["config"], sort_keys=True))
        assert results[0] == results[1]


class TestHttpApi:
    @pytest.fixture
    def client(self, tmp_path):
        ds_dir = tmp_path / "ds"
        save_dataset(step_dataset(2), ds_dir)
        app = create_app(ds_dir, tmp_path / "store")
        with TestClient(app) as client:
            yield client

    def test_series_listing(self, client):
        rows = client.get("/api/series").json()
        assert len(rows) == 2
        assert {"id", "name", "length", "pending_count"} <= set(rows[0])

    def test_unknown_series_404_with_envelope(self, client):
        resp = client.get("/api/series/ghost")
        assert resp.status_code == 404
        body = resp.json()
        assert set(body) == {"error", "detail"}

    def test_full_round_trip(self, client):
        sid = client.get("/api/series").json()[0]["id"]
        detect_resp = client.post(f"/api/series/{sid}/detect").json()
        assert detect_resp["detections"]
        det_id = detect_resp["detections"][0]["detection_id"]

        verdict = client.post(
            f"/api/detections/{det_id}/verdict",
            json={"status": "confirmed", "annotator": "alice"},
        )
        assert verdict.status_code == 200
        assert verdict.json()["status"] == "confirmed"

        labels = client.get("/api/labels/export").json()
        exported = {s["id"]: s for s in labels["series"]}
        assert sid in exported
        indices = exported[sid]["annotations"][0]["indices"]
        assert detect_resp["detections"][0]["index"] in indices

        retune = client.post("/api/retune", json={"budget": 2, "seed": 0}).json()
        assert retune["outcome"] in {"accepted", "retained"}
        versions = client.get("/api/config/versions").json()
        assert versions[0]["version"] == 1

    def test_series_detail_carries_active_config_result(self, client):
        sid = client.get("/api/series").json()[0]["id"]
        before = client.get(f"/api/series/{sid}").json()
        assert before["detection"] is None
        client.post(f"/api/series/{sid}/detect")
        after = client.get(f"/api/series/{sid}").json()
        assert after["detection"] is not None
        assert after["detection"]["final"]
        assert after["active_version"] == 1
        assert len(after["values"]) == len(before["values"])

    def test_detection_filtering(self, client):
        sid = client.get("/api/series").json()[0]["id"]
        client.post(f"/api/series/{sid}/detect")
        pending = client.get(f"/api/detections?series={sid}&status=pending").json()
        assert pending
        confirmed = client.get(f"/api/detections?series={sid}&status=confirmed").json()
        assert confirmed == []

    def test_bad_status_rejected(self, client):
        resp = client.get("/api/detections?status=bogus")
        assert resp.status_code == 400

    def test_verdict_validation_envelope(self, client):
        sid = client.get("/api/series").json()[0]["id"]
        det = client.post(f"/api/series/{sid}/detect").json()["detections"][0]
        resp = client.post(
            f"/api/detections/{det['detection_id']}/verdict",
            json={"status": "modified", "annotator": "a"},
        )
        assert resp.status_code == 400
        assert "modified_index" in resp.json()["detail"]

    def test_retune_without_labels_409(self, client):
        resp = client.post("/api/retune", json={"budget": 1, "seed": 0})
        assert resp.status_code == 409


def test_token_gate(tmp_path):
    ds_dir = tmp_path / "ds"
    save_dataset(step_dataset(1), ds_dir)
    app = create_app(ds_dir, tmp_path / "store", token="hunter2")
    with TestClient(app) as client:
        assert client.get("/api/series").status_code == 401
        ok = client.get("/api/series", headers={"X-Api-Token": "hunter2"})
        assert ok.status_code == 200
