"""HTTP JSON surface over the service core.

Everything lives under /v1. Raw volunteer ids ride exclusively in the
X-Volunteer-Id request header and never appear in any response body. Errors
use one envelope, {"error": {"code", "message"}}, with a closed code set and
statuses restricted to 400/404/409/422.

Closed error-code set (code → status):
  MALFORMED_REQUEST 400 · UNKNOWN_FORMAT 400 · NOT_FOUND 404 ·
  UNKNOWN_CAMPAIGN 404 · UNKNOWN_REGION 404 · UNKNOWN_VOLUNTEER 404 ·
  DUPLICATE_PLUGIN_ID 409 · NO_REGIONS 409 · ILLEGAL_TRANSITION 409 ·
  CAMPAIGN_COMPLETED 409 · EMPTY_CAMPAIGN_EXTENT 409 ·
  FEWER_THAN_THREE_VERTICES 422 · SELF_INTERSECTING 422 ·
  DUPLICATE_CONSECUTIVE_VERTEX 422 · COORDINATE_OUT_OF_RANGE 422 ·
  MALFORMED_GEOJSON 422 · EMPTY_REQUIRED_FIELD 422 · INVALID_DATE_RANGE 422 ·
  INVALID_QUOTA 422 · INVALID_WINDOW 422 · INVALID_PRIORITY 422 ·
  CHECKSUM_MISMATCH 422 · MISSING_SENSOR_PLUGIN 422 ·
  CAMPAIGN_NOT_RUNNING 422 · VOLUNTEER_POWERED_OFF 422 ·
  SENSOR_NOT_ENABLED 422 · VOLUNTEER_NOT_JOINED 422 · FUTURE_TIMESTAMP 422 ·
  INVALID_COORDINATES 422 · VALUE_TOO_LARGE 422 · INVALID_PSEUDONYM 422
"""
from __future__ import annotations

import socket
from typing import Optional

from fastapi import Body, FastAPI, Header, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import store
from .errors import BindFailure, CampaignError, MalformedRequest
from .service import Service


def _subclasses(cls):
    for sub in cls.__subclasses__():
        yield sub
        yield from _subclasses(sub)


CODE_STATUS = {cls.code: cls.http_status for cls in _subclasses(CampaignError)}

_ALLOWED_STATUSES = {400, 404, 409, 422}


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": {"code": code, "message": message}})


def _batch_result(result: dict):
    """Collapse an all-rejected single-cause batch into its error envelope.

    A device that posts while powered off should see 422 VOLUNTEER_POWERED_OFF,
    not a 200 with per-reading rejections; mixed batches keep the 200 shape.
    """
    rejected = result["rejected"]
    if result["accepted"] == 0 and rejected:
        codes = {r["code"] for r in rejected}
        if len(codes) == 1:
            code = codes.pop()
            return _error(CODE_STATUS.get(code, 422), code,
                          f"all {len(rejected)} readings rejected")
    return result


def create_app(svc: Service) -> FastAPI:
    app = FastAPI(title="campaignd", redirect_slashes=False,
                  docs_url=None, redoc_url=None)

    @app.exception_handler(CampaignError)
    def _domain_error(request: Request, exc: CampaignError):
        return _error(exc.http_status, exc.code, str(exc))

    @app.exception_handler(RequestValidationError)
    def _invalid_request(request: Request, exc: RequestValidationError):
        return _error(400, "MALFORMED_REQUEST", "request body or parameters "
                      "do not match the route contract")

    @app.exception_handler(StarletteHTTPException)
    def _http_error(request: Request, exc: StarletteHTTPException):
        if exc.status_code == 400:
            return _error(400, "MALFORMED_REQUEST", str(exc.detail))
        # anything else the router produces (404, 405, ...) is "no such route"
        return _error(404, "NOT_FOUND", str(exc.detail))

    # --- campaign lifecycle ---------------------------------------------------

    @app.post("/v1/campaigns", status_code=201)
    def create_campaign(body: dict = Body(...)):
        return svc.create_campaign(body)

    @app.get("/v1/campaigns/{cid}")
    def get_campaign(cid: str):
        return svc.get_campaign(cid)

    @app.post("/v1/campaigns/{cid}/status")
    def set_status(cid: str, body: dict = Body(...)):
        if "status" not in body:
            raise MalformedRequest("body must be {\"status\": ...}")
        return svc.set_status(cid, body["status"])

    @app.post("/v1/campaigns/{cid}/regions", status_code=201)
    def add_region(cid: str, body: dict = Body(...)):
        return svc.add_region(cid, body)

    @app.patch("/v1/campaigns/{cid}/regions/{rid}")
    def update_region(cid: str, rid: str, body: dict = Body(...)):
        return svc.update_region(cid, rid, body)

    # --- plugins ----------------------------------------------------------------

    @app.post("/v1/plugins/sensors", status_code=201)
    def register_sensor(body: dict = Body(...)):
        return svc.register_sensor_plugin(body)

    @app.get("/v1/plugins/sensors")
    def list_sensors(public: Optional[str] = Query(None)):
        return svc.list_sensor_plugins(
            public_only=public is not None and public.lower() == "true")

    @app.post("/v1/campaigns/{cid}/experiment-plugin")
    async def attach_experiment(
            cid: str, request: Request,
            plugin_id: Optional[str] = Header(None, alias="X-Plugin-Id"),
            version: Optional[str] = Header(None, alias="X-Plugin-Version"),
            checksum: Optional[str] = Header(None, alias="X-Plugin-Checksum"),
            required: Optional[str] = Header(
                None, alias="X-Plugin-Required-Sensors")):
        artifact = await request.body()
        sensors = [s.strip() for s in (required or "").split(",") if s.strip()]
        return svc.attach_experiment_plugin(
            cid, {"id": plugin_id, "version": version, "checksum": checksum,
                  "required_sensors": sensors}, artifact)

    # --- volunteers ----------------------------------------------------------------

    @app.post("/v1/campaigns/{cid}/join")
    def join(cid: str,
             volunteer: Optional[str] = Header(None, alias="X-Volunteer-Id")):
        return svc.join_experiment(cid, volunteer)

    @app.post("/v1/volunteers/power")
    def set_power(body: dict = Body(...),
                  volunteer: Optional[str] = Header(None, alias="X-Volunteer-Id")):
        return svc.set_power(volunteer, body.get("on"))

    @app.post("/v1/volunteers/sensors")
    def set_sensors(body: dict = Body(...),
                    volunteer: Optional[str] = Header(None, alias="X-Volunteer-Id")):
        return svc.set_sensors(volunteer, body.get("enabled"))

    @app.get("/v1/volunteers/stats")
    def volunteer_stats(
            volunteer: Optional[str] = Header(None, alias="X-Volunteer-Id")):
        return svc.volunteer_stats(volunteer)

    # --- measurements ----------------------------------------------------------------

    @app.post("/v1/campaigns/{cid}/measurements")
    def post_measurements(
            cid: str, body: dict = Body(...),
            volunteer: Optional[str] = Header(None, alias="X-Volunteer-Id")):
        return _batch_result(svc.ingest(cid, volunteer, body.get("readings")))

    @app.post("/v1/campaigns/{cid}/import")
    async def import_measurements(cid: str, request: Request,
                                  format: Optional[str] = Query(None)):
        if format not in ("json", "csv"):
            raise MalformedRequest("format must be json or csv")
        readings = store.parse_export(await request.body(), format)
        return _batch_result(svc.import_readings(cid, readings))

    # --- monitoring -------------------------------------------------------------------

    @app.get("/v1/campaigns/{cid}/completeness")
    def completeness(cid: str):
        return svc.completeness(cid)

    @app.get("/v1/campaigns/{cid}/heatmap")
    def heatmap(cid: str, cell_deg: Optional[str] = Query(None)):
        if cell_deg is None:
            raise MalformedRequest("cell_deg query parameter required")
        return svc.heatmap(cid, cell_deg)

    @app.get("/v1/campaigns/{cid}/points")
    def points(cid: str):
        return svc.points(cid)

    @app.get("/v1/stats")
    def stats(campaigns: Optional[str] = Query(None)):
        ids = [c for c in (campaigns or "").split(",") if c]
        if not ids:
            raise MalformedRequest("campaigns query parameter required, "
                                   "e.g. ?campaigns=c1,c2")
        return svc.stats(ids)

    @app.get("/v1/campaigns/{cid}/recommendations")
    def recommendations(cid: str, lon: Optional[str] = Query(None),
                        lat: Optional[str] = Query(None),
                        k: str = Query("5")):
        if lon is None or lat is None:
            raise MalformedRequest("lon and lat query parameters required")
        try:
            lon_f, lat_f = float(lon), float(lat)
        except ValueError:
            raise MalformedRequest("lon and lat must be numbers") from None
        try:
            k_n = int(k)
        except ValueError:
            raise MalformedRequest("k must be an integer >= 1") from None
        return svc.recommendations(cid, lon_f, lat_f, k_n)

    # --- export ------------------------------------------------------------------------

    @app.get("/v1/campaigns/{cid}/export")
    def export(cid: str, format: Optional[str] = Query(None)):
        data = svc.export(cid, format if format is not None else "")
        media = "application/json" if format == "json" else "text/csv"
        return Response(content=data, media_type=media)

    return app


def parse_bind(bind: str) -> tuple:
    host, sep, port_text = bind.rpartition(":")
    if not sep or not port_text.isdigit():
        raise BindFailure(f"bind address must be host:port, got {bind!r}")
    return (host or "127.0.0.1", int(port_text))


def serve(bind: str, data_dir) -> None:
    """Replay state from data_dir and serve until interrupted.

    Raises BindFailure for an unusable address and CorruptLog when replay
    finds a damaged event log (the service refuses to start on bad state).
    """
    host, port = parse_bind(bind)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise BindFailure(f"cannot bind {bind}: {exc}") from exc
    finally:
        probe.close()
    svc = Service(data_dir)
    app = create_app(svc)
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")
