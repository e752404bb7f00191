import hashlib
import json

import pytest
from fastapi.testclient import TestClient

from campaignd.api import create_app, parse_bind
from campaignd.errors import BindFailure, CorruptLog
from campaignd.service import LOG_NAME, Service
from campaignd.timeutil import parse_rfc3339

from factories import region_doc, square

NOW = parse_rfc3339("2025-05-06T12:00:00.000Z")

CAMPAIGN_BODY = {
    "title": "Street noise",
    "description": "d",
    "data_use": "aggregates only",
    "results_url": "https://example.org/r",
    "date_range": {"start": "2025-05-05T00:00:00.000Z",
                   "end": "2025-05-10T00:00:00.000Z"},
    "tz_offset_minutes": 0,
}

ARTIFACT = b"experiment plugin artifact bytes"


def make_client(svc=None):
    svc = svc or Service(clock=lambda: NOW)
    return svc, TestClient(create_app(svc), raise_server_exceptions=False)


def bootstrap(client, volunteer="device-1", region=None):
    """Sensor + campaign + region + plugin + running + joined volunteer."""
    assert client.post("/v1/plugins/sensors", json={
        "id": "noise-db", "name": "Noise", "modality": "acoustic",
        "public": True}).status_code == 201
    cid = client.post("/v1/campaigns", json=CAMPAIGN_BODY).json()["id"]
    rid = client.post(f"/v1/campaigns/{cid}/regions",
                      json=region or region_doc()).json()["id"]
    r = client.post(f"/v1/campaigns/{cid}/experiment-plugin", content=ARTIFACT,
                    headers={
                        "X-Plugin-Id": "exp-noise",
                        "X-Plugin-Version": "1.0",
                        "X-Plugin-Checksum": hashlib.sha256(ARTIFACT).hexdigest(),
                        "X-Plugin-Required-Sensors": "noise-db",
                    })
    assert r.status_code == 200, r.text
    assert client.post(f"/v1/campaigns/{cid}/status",
                       json={"status": "running"}).status_code == 200
    hdr = {"X-Volunteer-Id": volunteer}
    assert client.post("/v1/volunteers/sensors",
                       json={"enabled": ["noise-db"]}, headers=hdr).status_code == 200
    joined = client.post(f"/v1/campaigns/{cid}/join", headers=hdr)
    assert joined.status_code == 200 and joined.json()["missing_sensors"] == []
    return cid, rid


def post_reading(client, cid, volunteer="device-1", **kw):
    doc = {"sensor_id": "noise-db", "at": "2025-05-05T09:00:00.000Z",
           "lon": -0.075, "lat": 51.52, "value": "61"}
    doc.update(kw)
    return client.post(f"/v1/campaigns/{cid}/measurements",
                       json={"readings": [doc]},
                       headers={"X-Volunteer-Id": volunteer})


class TestLifecycle:
    def test_full_flow(self):
        _, client = make_client()
        cid, rid = bootstrap(client)

        got = client.get(f"/v1/campaigns/{cid}").json()
        assert got["status"] == "running"
        assert got["regions"][0]["id"] == rid
        assert "secret" not in json.dumps(got)

        r = post_reading(client, cid)
        assert r.status_code == 200
        body = r.json()
        assert body["accepted"] == 1 and body["rejected"] == []

        rep = client.get(f"/v1/campaigns/{cid}/completeness").json()
        cell = rep["regions"][0]["cells"][0]
        assert cell["count"] == 1 and cell["completeness"] == 0.2

    def test_campaign_starts_draft_with_no_regions(self):
        _, client = make_client()
        r = client.post("/v1/campaigns", json=CAMPAIGN_BODY)
        assert r.status_code == 201
        doc = r.json()
        assert doc["status"] == "draft" and doc["regions"] == []

    def test_inline_regions_rejected(self):
        _, client = make_client()
        body = dict(CAMPAIGN_BODY, regions=[region_doc()])
        r = client.post("/v1/campaigns", json=body)
        assert r.status_code == 400
        assert "regions" in r.json()["error"]["message"]

    def test_attach_requires_region(self):
        _, client = make_client()
        cid = client.post("/v1/campaigns", json=CAMPAIGN_BODY).json()["id"]
        r = client.post(f"/v1/campaigns/{cid}/experiment-plugin", content=ARTIFACT,
                        headers={"X-Plugin-Id": "e", "X-Plugin-Version": "1",
                                 "X-Plugin-Checksum": hashlib.sha256(ARTIFACT).hexdigest()})
        assert r.status_code == 409
        assert r.json()["error"]["code"] == "NO_REGIONS"

    def test_attach_checksum_mismatch(self):
        _, client = make_client()
        cid = client.post("/v1/campaigns", json=CAMPAIGN_BODY).json()["id"]
        client.post(f"/v1/campaigns/{cid}/regions", json=region_doc())
        r = client.post(f"/v1/campaigns/{cid}/experiment-plugin", content=ARTIFACT,
                        headers={"X-Plugin-Id": "e", "X-Plugin-Version": "1",
                                 "X-Plugin-Checksum": "0" * 64})
        assert (r.status_code, r.json()["error"]["code"]) == (422, "CHECKSUM_MISMATCH")

    def test_attach_missing_sensor_plugin(self):
        _, client = make_client()
        cid = client.post("/v1/campaigns", json=CAMPAIGN_BODY).json()["id"]
        client.post(f"/v1/campaigns/{cid}/regions", json=region_doc())
        r = client.post(f"/v1/campaigns/{cid}/experiment-plugin", content=ARTIFACT,
                        headers={"X-Plugin-Id": "e", "X-Plugin-Version": "1",
                                 "X-Plugin-Checksum": hashlib.sha256(ARTIFACT).hexdigest(),
                                 "X-Plugin-Required-Sensors": "does-not-exist"})
        assert (r.status_code, r.json()["error"]["code"]) == (422, "MISSING_SENSOR_PLUGIN")

    def test_join_requires_validated_or_running(self):
        _, client = make_client()
        cid = client.post("/v1/campaigns", json=CAMPAIGN_BODY).json()["id"]
        r = client.post(f"/v1/campaigns/{cid}/join",
                        headers={"X-Volunteer-Id": "d"})
        assert (r.status_code, r.json()["error"]["code"]) == (409, "ILLEGAL_TRANSITION")

    def test_join_reports_missing_sensors(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        r = client.post(f"/v1/campaigns/{cid}/join",
                        headers={"X-Volunteer-Id": "fresh-device"})
        assert r.status_code == 200
        assert r.json()["missing_sensors"] == ["noise-db"]

    def test_join_completed_campaign(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        client.post(f"/v1/campaigns/{cid}/status", json={"status": "completed"})
        r = client.post(f"/v1/campaigns/{cid}/join",
                        headers={"X-Volunteer-Id": "late-device"})
        assert (r.status_code, r.json()["error"]["code"]) == (409, "CAMPAIGN_COMPLETED")

    def test_sensor_listing_public_filter(self):
        _, client = make_client()
        client.post("/v1/plugins/sensors", json={
            "id": "a", "name": "A", "modality": "x", "public": True})
        client.post("/v1/plugins/sensors", json={
            "id": "b", "name": "B", "modality": "x", "public": False})
        everything = client.get("/v1/plugins/sensors").json()
        public = client.get("/v1/plugins/sensors", params={"public": "true"}).json()
        assert {s["id"] for s in everything} == {"a", "b"}
        assert {s["id"] for s in public} == {"a"}

    def test_duplicate_sensor_plugin(self):
        _, client = make_client()
        body = {"id": "a", "name": "A", "modality": "x", "public": True}
        assert client.post("/v1/plugins/sensors", json=body).status_code == 201
        r = client.post("/v1/plugins/sensors", json=body)
        assert (r.status_code, r.json()["error"]["code"]) == (409, "DUPLICATE_PLUGIN_ID")


class TestIngestSemantics:
    def test_mixed_batch_reports_each_rejection(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        readings = [
            {"sensor_id": "noise-db", "at": "2025-05-05T09:00:00.000Z",
             "lon": -0.075, "lat": 51.52, "value": "61"},
            {"sensor_id": "noise-db", "at": "2025-05-05T09:00:00.000Z",
             "lon": 999.0, "lat": 51.52, "value": "61"},
            {"sensor_id": "pm25", "at": "2025-05-05T09:00:00.000Z",
             "lon": -0.075, "lat": 51.52, "value": "61"},
        ]
        r = client.post(f"/v1/campaigns/{cid}/measurements",
                        json={"readings": readings},
                        headers={"X-Volunteer-Id": "device-1"})
        assert r.status_code == 200
        body = r.json()
        assert body["accepted"] == 1
        assert body["rejected"] == [
            {"index": 1, "code": "INVALID_COORDINATES"},
            {"index": 2, "code": "SENSOR_NOT_ENABLED"},
        ]

    def test_uniform_total_rejection_collapses_to_envelope(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        client.post("/v1/volunteers/power", json={"on": False},
                    headers={"X-Volunteer-Id": "device-1"})
        r = post_reading(client, cid)
        assert r.status_code == 422
        assert r.json()["error"]["code"] == "VOLUNTEER_POWERED_OFF"

    def test_power_cycle_restores_acceptance(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        hdr = {"X-Volunteer-Id": "device-1"}
        client.post("/v1/volunteers/power", json={"on": False}, headers=hdr)
        assert post_reading(client, cid).status_code == 422
        client.post("/v1/volunteers/power", json={"on": True}, headers=hdr)
        assert post_reading(client, cid).json()["accepted"] == 1

    def test_future_timestamp_rejected(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        r = post_reading(client, cid, at="2025-05-08T12:00:00.001Z")
        assert r.json()["error"]["code"] == "FUTURE_TIMESTAMP"

    def test_out_of_area_and_out_of_window_retained(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        assert post_reading(client, cid, lon=10.0, lat=10.0).json()["accepted"] == 1
        assert post_reading(client, cid, at="2025-05-05T23:00:00.000Z").json()["accepted"] == 1
        rep = client.get(f"/v1/campaigns/{cid}/completeness").json()
        assert rep["regions"][0]["cells"][0]["count"] == 0
        assert client.get(f"/v1/campaigns/{cid}/points").json()["total"] == 2

    def test_readings_must_be_list(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        r = client.post(f"/v1/campaigns/{cid}/measurements",
                        json={"readings": "nope"},
                        headers={"X-Volunteer-Id": "device-1"})
        assert (r.status_code, r.json()["error"]["code"]) == (400, "MALFORMED_REQUEST")

    def test_empty_batch(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        r = client.post(f"/v1/campaigns/{cid}/measurements",
                        json={"readings": []},
                        headers={"X-Volunteer-Id": "device-1"})
        assert r.status_code == 200
        assert r.json() == {"accepted": 0, "rejected": []}

    def test_missing_volunteer_header(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        r = client.post(f"/v1/campaigns/{cid}/measurements",
                        json={"readings": []})
        assert (r.status_code, r.json()["error"]["code"]) == (400, "MALFORMED_REQUEST")


class TestVolunteerStats:
    def test_counts_and_instants(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        post_reading(client, cid)
        post_reading(client, cid, at="2025-05-05T10:00:00.000Z")
        r = client.get("/v1/volunteers/stats", headers={"X-Volunteer-Id": "device-1"})
        body = r.json()
        assert body["total"] == 2
        assert body["per_campaign"] == {cid: 2}
        assert body["first_at"] == "2025-05-05T09:00:00.000Z"
        assert body["last_at"] == "2025-05-05T10:00:00.000Z"
        assert "device-1" not in json.dumps(body)

    def test_unknown_volunteer(self):
        _, client = make_client()
        bootstrap(client)
        r = client.get("/v1/volunteers/stats", headers={"X-Volunteer-Id": "ghost"})
        assert (r.status_code, r.json()["error"]["code"]) == (404, "UNKNOWN_VOLUNTEER")


class TestErrorEnvelope:
    def test_unknown_campaign_and_region(self):
        _, client = make_client()
        bootstrap(client)
        for path in ["/v1/campaigns/c99", "/v1/campaigns/c99/completeness",
                     "/v1/campaigns/c99/points"]:
            r = client.get(path)
            assert (r.status_code, r.json()["error"]["code"]) == (404, "UNKNOWN_CAMPAIGN")
        r = client.patch("/v1/campaigns/c1/regions/r9", json={"priority": 2.0})
        assert (r.status_code, r.json()["error"]["code"]) == (404, "UNKNOWN_REGION")

    def test_unknown_route_is_not_found(self):
        _, client = make_client()
        r = client.get("/v1/nope")
        assert r.status_code == 404
        assert r.json()["error"]["code"] == "NOT_FOUND"

    def test_wrong_method_is_not_found(self):
        _, client = make_client()
        r = client.delete("/v1/campaigns")
        assert r.status_code == 404
        assert r.json()["error"]["code"] == "NOT_FOUND"

    def test_validation_error_is_400(self):
        _, client = make_client()
        r = client.post("/v1/campaigns", content=b"not json",
                        headers={"content-type": "application/json"})
        assert (r.status_code, r.json()["error"]["code"]) == (400, "MALFORMED_REQUEST")

    def test_statuses_stay_in_closed_set(self):
        _, client = make_client()
        cid, rid = bootstrap(client)
        probes = [
            client.get("/v1/xyz"),
            client.post("/v1/campaigns", json={}),
            client.post("/v1/campaigns", json=dict(CAMPAIGN_BODY, title="")),
            client.get("/v1/campaigns/nope"),
            client.post(f"/v1/campaigns/{cid}/status", json={"status": "draft"}),
            client.post(f"/v1/campaigns/{cid}/regions",
                        json=region_doc() | {"polygon": square(0, 0, 0) }),
            client.get(f"/v1/campaigns/{cid}/heatmap"),
            client.get(f"/v1/campaigns/{cid}/heatmap", params={"cell_deg": "-1"}),
            client.get(f"/v1/campaigns/{cid}/export", params={"format": "xml"}),
            client.get("/v1/stats"),
            client.get(f"/v1/campaigns/{cid}/recommendations"),
        ]
        for r in probes:
            assert r.status_code in (400, 404, 409, 422), r.text
            body = r.json()
            assert set(body) == {"error"}
            assert set(body["error"]) == {"code", "message"}

    def test_invalid_geometry_codes(self):
        _, client = make_client()
        cid = client.post("/v1/campaigns", json=CAMPAIGN_BODY).json()["id"]
        bowtie = {"type": "Polygon", "coordinates": [[
            [0, 0], [1, 1], [1, 0], [0, 1], [0, 0]]]}
        r = client.post(f"/v1/campaigns/{cid}/regions",
                        json=region_doc() | {"polygon": bowtie})
        assert (r.status_code, r.json()["error"]["code"]) == (422, "SELF_INTERSECTING")
        two = {"type": "Polygon", "coordinates": [[[0, 0], [1, 1], [0, 0]]]}
        r = client.post(f"/v1/campaigns/{cid}/regions",
                        json=region_doc() | {"polygon": two})
        assert r.json()["error"]["code"] in ("FEWER_THAN_THREE_VERTICES",
                                             "MALFORMED_GEOJSON")


class TestRegionUpdate:
    def test_patch_merges_and_recounts(self):
        _, client = make_client()
        cid, rid = bootstrap(client)
        # point outside the original square, inside the window
        assert post_reading(client, cid, lon=0.5, lat=51.52).json()["accepted"] == 1
        rep = client.get(f"/v1/campaigns/{cid}/completeness").json()
        assert rep["regions"][0]["cells"][0]["count"] == 0

        r = client.patch(f"/v1/campaigns/{cid}/regions/{rid}",
                         json={"polygon": square(-0.2, 51.4, 1.0)})
        assert r.status_code == 200
        rep = client.get(f"/v1/campaigns/{cid}/completeness").json()
        assert rep["regions"][0]["cells"][0]["count"] == 1
        # untouched fields survive the merge
        got = client.get(f"/v1/campaigns/{cid}").json()["regions"][0]
        assert got["label"] == region_doc()["label"]
        assert got["priority"] == 1.0

    def test_patch_completed_campaign_rejected(self):
        _, client = make_client()
        cid, rid = bootstrap(client)
        client.post(f"/v1/campaigns/{cid}/status", json={"status": "completed"})
        r = client.patch(f"/v1/campaigns/{cid}/regions/{rid}", json={"priority": 2.0})
        assert (r.status_code, r.json()["error"]["code"]) == (409, "CAMPAIGN_COMPLETED")

    def test_patch_unknown_keys_rejected(self):
        _, client = make_client()
        cid, rid = bootstrap(client)
        r = client.patch(f"/v1/campaigns/{cid}/regions/{rid}", json={"nope": 1})
        assert (r.status_code, r.json()["error"]["code"]) == (400, "MALFORMED_REQUEST")


class TestDurability:
    def test_replay_reproduces_state(self, tmp_path):
        svc = Service(data_dir=tmp_path, clock=lambda: NOW)
        client = TestClient(create_app(svc), raise_server_exceptions=False)
        cid, rid = bootstrap(client)
        post_reading(client, cid)
        post_reading(client, cid, lon=10.0, lat=10.0)
        client.patch(f"/v1/campaigns/{cid}/regions/{rid}",
                     json={"priority": 2.5})
        before_rep = client.get(f"/v1/campaigns/{cid}/completeness").json()
        before_stats = client.get("/v1/stats", params={"campaigns": cid}).json()
        before_export = client.get(f"/v1/campaigns/{cid}/export",
                                   params={"format": "csv"}).content
        before_vol = client.get("/v1/volunteers/stats",
                                headers={"X-Volunteer-Id": "device-1"}).json()
        svc.close()

        svc2 = Service(data_dir=tmp_path, clock=lambda: NOW)
        client2 = TestClient(create_app(svc2), raise_server_exceptions=False)
        assert client2.get(f"/v1/campaigns/{cid}/completeness").json() == before_rep
        assert client2.get("/v1/stats", params={"campaigns": cid}).json() == before_stats
        assert client2.get(f"/v1/campaigns/{cid}/export",
                           params={"format": "csv"}).content == before_export
        assert client2.get("/v1/volunteers/stats",
                           headers={"X-Volunteer-Id": "device-1"}).json() == before_vol
        # and the replayed service keeps accepting
        assert post_reading(client2, cid).json()["accepted"] == 1

    def test_torn_tail_names_last_valid_seq(self, tmp_path):
        svc = Service(data_dir=tmp_path, clock=lambda: NOW)
        client = TestClient(create_app(svc), raise_server_exceptions=False)
        cid, _ = bootstrap(client)
        post_reading(client, cid)
        svc.close()
        log = tmp_path / LOG_NAME
        data = log.read_bytes()
        n_events = data.count(b"\n")
        log.write_bytes(data[:-10])  # tear the final record

        with pytest.raises(CorruptLog) as exc:
            Service(data_dir=tmp_path, clock=lambda: NOW)
        assert exc.value.last_valid_seq == n_events - 1

    def test_garbled_line_detected(self, tmp_path):
        svc = Service(data_dir=tmp_path, clock=lambda: NOW)
        client = TestClient(create_app(svc), raise_server_exceptions=False)
        bootstrap(client)
        svc.close()
        log = tmp_path / LOG_NAME
        lines = log.read_bytes().splitlines(keepends=True)
        lines[2] = b'{"seq": 3, "type": "unparseable...\n'
        log.write_bytes(b"".join(lines))
        with pytest.raises(CorruptLog) as exc:
            Service(data_dir=tmp_path, clock=lambda: NOW)
        assert exc.value.last_valid_seq == 2

    def test_seq_gap_detected(self, tmp_path):
        svc = Service(data_dir=tmp_path, clock=lambda: NOW)
        client = TestClient(create_app(svc), raise_server_exceptions=False)
        bootstrap(client)
        svc.close()
        log = tmp_path / LOG_NAME
        lines = log.read_bytes().splitlines(keepends=True)
        del lines[3]
        log.write_bytes(b"".join(lines))
        with pytest.raises(CorruptLog) as exc:
            Service(data_dir=tmp_path, clock=lambda: NOW)
        assert exc.value.last_valid_seq == 3


class TestExportAndImport:
    def test_repeated_get_byte_identical(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        post_reading(client, cid)
        post_reading(client, cid, at="2025-05-05T08:00:00.000Z", lon=-0.08)
        for fmt in ("csv", "json"):
            a = client.get(f"/v1/campaigns/{cid}/export", params={"format": fmt})
            b = client.get(f"/v1/campaigns/{cid}/export", params={"format": fmt})
            assert a.content == b.content
        assert a.headers["content-type"].startswith("application/json")

    def test_import_round_trip(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        post_reading(client, cid)
        post_reading(client, cid, at="2025-05-05T08:30:00.000Z", value="58")
        exported = client.get(f"/v1/campaigns/{cid}/export",
                              params={"format": "csv"}).content

        _, client2 = make_client()
        cid2, _ = bootstrap(client2)
        r = client2.post(f"/v1/campaigns/{cid2}/import?format=csv",
                         content=exported)
        assert r.status_code == 200, r.text
        assert r.json()["accepted"] == 2
        re_export = client2.get(f"/v1/campaigns/{cid2}/export",
                                params={"format": "csv"}).content
        assert re_export == exported
        stats = client2.get("/v1/stats", params={"campaigns": cid2}).json()
        assert stats["measurements"] == 2 and stats["participants"] == 1

    def test_export_never_leaks_raw_id(self):
        _, client = make_client()
        cid, _ = bootstrap(client, volunteer="super-secret-handset")
        post_reading(client, cid, volunteer="super-secret-handset")
        for fmt in ("csv", "json"):
            data = client.get(f"/v1/campaigns/{cid}/export",
                              params={"format": fmt}).content
            assert b"super-secret-handset" not in data


class TestQueryValidation:
    def test_heatmap_requires_positive_cell_deg(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        post_reading(client, cid)
        ok = client.get(f"/v1/campaigns/{cid}/heatmap", params={"cell_deg": "0.1"})
        assert ok.status_code == 200
        assert ok.json()["total"] == 1
        for bad in ("", "0", "-0.5", "abc"):
            r = client.get(f"/v1/campaigns/{cid}/heatmap", params={"cell_deg": bad})
            assert r.status_code == 400, bad

    def test_stats_requires_campaign_list(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        assert client.get("/v1/stats").status_code == 400
        assert client.get("/v1/stats", params={"campaigns": ""}).status_code == 400
        r = client.get("/v1/stats", params={"campaigns": f"{cid},ghost"})
        assert (r.status_code, r.json()["error"]["code"]) == (404, "UNKNOWN_CAMPAIGN")
        ok = client.get("/v1/stats", params={"campaigns": f"{cid},{cid}"})
        assert ok.json()["cities"] == 1  # duplicates collapse

    def test_recommendations_param_parsing(self):
        _, client = make_client()
        cid, _ = bootstrap(client)
        ok = client.get(f"/v1/campaigns/{cid}/recommendations",
                        params={"lon": "-0.08", "lat": "51.51"})
        assert ok.status_code == 200
        recs = ok.json()
        assert recs and recs[0]["region_id"] == "r1"
        for params in ({"lon": "x", "lat": "0"}, {"lon": "0"},
                       {"lon": "0", "lat": "0", "k": "0"},
                       {"lon": "0", "lat": "0", "k": "2.5"}):
            r = client.get(f"/v1/campaigns/{cid}/recommendations", params=params)
            assert r.status_code == 400, params
        far = client.get(f"/v1/campaigns/{cid}/recommendations",
                         params={"lon": "400", "lat": "0"})
        assert far.json()["error"]["code"] == "INVALID_COORDINATES"


def test_parse_bind():
    assert parse_bind("127.0.0.1:8080") == ("127.0.0.1", 8080)
    with pytest.raises(BindFailure):
        parse_bind("127.0.0.1")
    with pytest.raises(BindFailure):
        parse_bind("host:notaport")
