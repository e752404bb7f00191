"""Drive a service through a scenario and account for every reading.

The run is a single-threaded loop over fixed ticks. Per tick, in scenario
order per volunteer: scheduled power toggles, one mobility step (random
waypoint inside the campaign extent plus a roaming margin), then emission at
the volunteer's profile rate inside their activity windows. All randomness
comes from one xoshiro256** stream, and the draw pattern is independent of
power state (devices keep submitting while off; the server rejects), so two
scenarios differing only in power-off schedules emit identical readings.
"""
from __future__ import annotations

import hashlib
import math
import time as systime

import httpx

from ..errors import ServiceUnreachable
from ..timeutil import DAY_MS, MINUTE_MS, format_rfc3339, local_minute_of_day
from . import ledger
from .rng import Xoshiro256StarStar
from .scenario import Scenario

ARTIFACT_PREFIX = b"experiment-plugin:"


def plugin_artifact(plugin_id: str, version: str) -> bytes:
    return ARTIFACT_PREFIX + f"{plugin_id}:{version}".encode("utf-8")


def _extent(campaign_doc: dict, margin: float) -> tuple:
    """(min_lon, min_lat, max_lon, max_lat) over the initial region rings."""
    lons = []
    lats = []
    for region in campaign_doc["regions"]:
        for lon, lat in region["polygon"]["coordinates"][0]:
            lons.append(lon)
            lats.append(lat)
    return (max(-180.0, min(lons) - margin), max(-90.0, min(lats) - margin),
            min(180.0, max(lons) + margin), min(90.0, max(lats) + margin))


class _Client:
    def __init__(self, client):
        self._client = client

    def request(self, method: str, path: str, **kw):
        try:
            return self._client.request(method, path, **kw)
        except httpx.HTTPError as exc:
            raise ServiceUnreachable(f"{method} {path}: {exc}") from exc


def run(scenario: Scenario, client) -> dict:
    """Execute the scenario against ``client`` (httpx-compatible).

    Returns a report with the ids the service assigned, request/acceptance
    tallies observed over the wire, and the independent ground-truth ledger.
    """
    t0 = systime.monotonic()
    c = _Client(client)
    requests = 0

    def call(method, path, expect, **kw):
        nonlocal requests
        requests += 1
        resp = c.request(method, path, **kw)
        if expect is not None and resp.status_code not in expect:
            raise RuntimeError(
                f"{method} {path} -> {resp.status_code}: {resp.text[:300]}")
        return resp

    # --- setup: sensors, campaigns, regions, plugins, volunteers ---------------
    for sensor in scenario.sensors:
        # 409 means a previous run on this server already registered it
        call("POST", "/v1/plugins/sensors", (201, 409), json=sensor)

    campaign_ids = []
    region_ids: dict = {}
    for i, doc in enumerate(scenario.campaigns):
        body = {k: doc[k] for k in ("title", "description", "data_use",
                                    "results_url", "date_range",
                                    "tz_offset_minutes")}
        created = call("POST", "/v1/campaigns", (201,), json=body).json()
        cid = created["id"]
        campaign_ids.append(cid)
        region_ids[cid] = []
        for region in doc["regions"]:
            added = call("POST", f"/v1/campaigns/{cid}/regions", (201,),
                         json=region).json()
            region_ids[cid].append(added["id"])
        plugin_id = f"exp-{i + 1}"
        artifact = plugin_artifact(plugin_id, "1.0")
        call("POST", f"/v1/campaigns/{cid}/experiment-plugin", (200,),
             content=artifact,
             headers={
                 "Content-Type": "application/octet-stream",
                 "X-Plugin-Id": plugin_id,
                 "X-Plugin-Version": "1.0",
                 "X-Plugin-Checksum": hashlib.sha256(artifact).hexdigest(),
                 "X-Plugin-Required-Sensors": ",".join(
                     doc.get("required_sensors", [])),
             })
        call("POST", f"/v1/campaigns/{cid}/status", (200,),
             json={"status": "running"})

    for v in scenario.volunteers:
        headers = {"X-Volunteer-Id": v.id}
        required = scenario.campaigns[v.campaign_index].get("required_sensors", [])
        enabled = sorted({v.sensor, *required})
        call("POST", "/v1/volunteers/sensors", (200,),
             json={"enabled": enabled}, headers=headers)
        joined = call("POST", f"/v1/campaigns/{campaign_ids[v.campaign_index]}/join",
                      (200,), headers=headers).json()
        if joined["missing_sensors"]:
            raise RuntimeError(f"{v.id} missing sensors {joined['missing_sensors']}")

    # --- the tick loop ---------------------------------------------------------
    rng = Xoshiro256StarStar(scenario.seed)
    tick_ms = scenario.tick_minutes * MINUTE_MS
    start = scenario.start_ms
    n_ticks = scenario.duration_days * (1440 // scenario.tick_minutes)
    extents = [_extent(scenario.campaigns[v.campaign_index], v.roam_deg)
               for v in scenario.volunteers]

    pos = [list(v.home) for v in scenario.volunteers]
    target: list = [None] * len(scenario.volunteers)
    speed = [0.0] * len(scenario.volunteers)
    credit = [0.0] * len(scenario.volunteers)
    powered = [True] * len(scenario.volunteers)

    pending_updates = list(scenario.updates)
    emitted: list = []
    observed = {"accepted": 0, "rejected": {}}
    per_volunteer = {v.id: {"accepted": 0, "rejected": {}}
                     for v in scenario.volunteers}

    def tally_reject(vol_id: str, code: str, n: int) -> None:
        observed["rejected"][code] = observed["rejected"].get(code, 0) + n
        rej = per_volunteer[vol_id]["rejected"]
        rej[code] = rej.get(code, 0) + n

    for tick_index in range(n_ticks):
        tick_start = start + tick_index * tick_ms

        while pending_updates and pending_updates[0].at <= tick_start:
            u = pending_updates.pop(0)
            cid = campaign_ids[u.campaign_index]
            call("PATCH", f"/v1/campaigns/{cid}/regions/{u.region_id}", (200,),
                 json=u.patch)

        for vi, v in enumerate(scenario.volunteers):
            headers = {"X-Volunteer-Id": v.id}
            on = not any(iv.off_from <= tick_start < iv.off_to
                         for iv in v.power_off)
            if on != powered[vi]:
                call("POST", "/v1/volunteers/power", (200,),
                     json={"on": on}, headers=headers)
                powered[vi] = on

            # mobility: pick a waypoint when idle, then advance toward it
            if target[vi] is None:
                min_lon, min_lat, max_lon, max_lat = extents[vi]
                target[vi] = (rng.uniform(min_lon, max_lon),
                              rng.uniform(min_lat, max_lat))
                speed[vi] = rng.uniform(*v.speed_range)
            tx, ty = target[vi]
            px, py = pos[vi]
            dist = math.hypot(tx - px, ty - py)
            step = speed[vi] * scenario.tick_minutes
            if dist <= step:
                pos[vi] = [tx, ty]
                target[vi] = None
            elif dist > 0:
                pos[vi] = [px + (tx - px) * step / dist,
                           py + (ty - py) * step / dist]

            # emission: profile rate accrues only inside activity windows
            tz = scenario.campaigns[v.campaign_index]["tz_offset_minutes"]
            minute = local_minute_of_day(tick_start, tz)
            if not any(s <= minute < e for s, e in v.activity_windows):
                continue
            credit[vi] += v.readings_per_hour * scenario.tick_minutes / 60.0
            n = int(credit[vi])
            credit[vi] -= n
            if n == 0:
                continue
            batch = []
            for _ in range(n):
                at = tick_start + rng.randint(0, tick_ms - 1)
                lon = pos[vi][0] + rng.uniform(-v.jitter_deg, v.jitter_deg)
                lat = pos[vi][1] + rng.uniform(-v.jitter_deg, v.jitter_deg)
                lon = max(-180.0, min(180.0, lon))
                lat = max(-90.0, min(90.0, lat))
                value = rng.randint(-90, -30)
                batch.append({"sensor_id": v.sensor, "at": format_rfc3339(at),
                              "lon": lon, "lat": lat, "value": value})
                emitted.append({"vol": vi, "vol_id": v.id,
                                "campaign": v.campaign_index, "at": at,
                                "lon": lon, "lat": lat,
                                "tick_start": tick_start})
            cid = campaign_ids[v.campaign_index]
            resp = call("POST", f"/v1/campaigns/{cid}/measurements", None,
                        json={"readings": batch}, headers=headers)
            if resp.status_code == 200:
                body = resp.json()
                observed["accepted"] += body["accepted"]
                per_volunteer[v.id]["accepted"] += body["accepted"]
                for r in body["rejected"]:
                    tally_reject(v.id, r["code"], 1)
            else:
                body = resp.json()
                tally_reject(v.id, body["error"]["code"], len(batch))

    return {
        "seed": scenario.seed,
        "duration_days": scenario.duration_days,
        "tick_minutes": scenario.tick_minutes,
        "campaign_ids": campaign_ids,
        "region_ids": region_ids,
        "requests": requests,
        "wall_clock_s": round(systime.monotonic() - t0, 3),
        "observed": {**observed, "per_volunteer": per_volunteer},
        "ledger": ledger.compute(scenario.raw, emitted),
    }
