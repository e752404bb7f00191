"""Scenario files: schema, validation with JSON-pointer error locations.

A scenario pins everything a run needs: the seed, the campaigns (same JSON
shape the API accepts), a volunteer fleet with homes and activity profiles,
optional power-off intervals and mid-run region patches. Campaign fragments
are validated with the same rules the service applies, so a scenario that
validates here will be accepted over the wire.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .. import campaign as cmod
from ..errors import CampaignError, ScenarioInvalid
from ..timeutil import parse_hhmm, parse_rfc3339


@dataclass(frozen=True)
class PowerInterval:
    off_from: int  # epoch ms, inclusive
    off_to: int    # epoch ms, exclusive


@dataclass(frozen=True)
class Volunteer:
    id: str
    campaign_index: int
    home: tuple                 # (lon, lat)
    sensor: str
    readings_per_hour: float
    activity_windows: tuple     # ((start_min, end_min), ...) campaign-local
    roam_deg: float             # waypoint box inflation around region extent
    jitter_deg: float           # per-reading positional scatter
    speed_range: tuple          # (min, max) degrees per minute
    power_off: tuple            # (PowerInterval, ...)


@dataclass(frozen=True)
class RegionUpdate:
    at: int
    campaign_index: int
    region_id: str
    patch: dict


@dataclass(frozen=True)
class Scenario:
    seed: int
    duration_days: int
    tick_minutes: int
    sensors: tuple       # raw sensor plugin docs
    campaigns: tuple     # raw campaign docs (with regions, required_sensors)
    volunteers: tuple    # Volunteer
    updates: tuple       # RegionUpdate, sorted by at
    raw: dict = field(repr=False)  # untouched document, for the ledger

    @property
    def start_ms(self) -> int:
        return min(parse_rfc3339(c["date_range"]["start"]) for c in self.campaigns)


def _fail(pointer: str, detail: str):
    raise ScenarioInvalid(pointer, detail)


def _require(doc, key, pointer):
    if key not in doc:
        _fail(pointer, f"missing required field {key!r}")
    return doc[key]


def _int_field(doc, key, pointer, lo=None, hi=None):
    value = _require(doc, key, pointer)
    if not isinstance(value, int) or isinstance(value, bool):
        _fail(f"{pointer}/{key}", "must be an integer")
    if lo is not None and value < lo:
        _fail(f"{pointer}/{key}", f"must be >= {lo}")
    if hi is not None and value > hi:
        _fail(f"{pointer}/{key}", f"must be <= {hi}")
    return value


def _instant(text, pointer):
    try:
        return parse_rfc3339(text)
    except CampaignError as exc:
        _fail(pointer, str(exc))


def _hhmm(text, pointer):
    try:
        return parse_hhmm(text)
    except CampaignError as exc:
        _fail(pointer, str(exc))


def _volunteer(doc, i, n_campaigns) -> Volunteer:
    p = f"/volunteers/{i}"
    if not isinstance(doc, dict):
        _fail(p, "must be an object")
    vid = _require(doc, "id", p)
    if not isinstance(vid, str) or not vid:
        _fail(f"{p}/id", "must be a non-empty string")
    c_idx = _int_field(doc, "campaign", p, lo=0, hi=n_campaigns - 1)
    home = _require(doc, "home", p)
    if (not isinstance(home, dict) or not isinstance(home.get("lon"), (int, float))
            or not isinstance(home.get("lat"), (int, float))):
        _fail(f"{p}/home", "must be {lon, lat}")
    sensor = _require(doc, "sensor", p)
    rate = _require(doc, "readings_per_hour", p)
    if not isinstance(rate, (int, float)) or rate <= 0:
        _fail(f"{p}/readings_per_hour", "must be a positive number")
    windows_doc = _require(doc, "activity_windows", p)
    if not isinstance(windows_doc, list):
        _fail(f"{p}/activity_windows", "must be a list")
    windows = []
    for j, w in enumerate(windows_doc):
        wp = f"{p}/activity_windows/{j}"
        if not isinstance(w, dict):
            _fail(wp, "must be an object")
        start = _hhmm(_require(w, "start", wp), f"{wp}/start")
        end = _hhmm(_require(w, "end", wp), f"{wp}/end")
        if end == 0:
            end = 1440
        if start >= end:
            _fail(wp, "activity window start must precede end")
        windows.append((start, end))
    if not windows:
        _fail(f"{p}/activity_windows", "must not be empty")
    speed = doc.get("speed_deg_per_min", [0.0005, 0.003])
    if (not isinstance(speed, list) or len(speed) != 2
            or not 0 < speed[0] <= speed[1]):
        _fail(f"{p}/speed_deg_per_min", "must be [min, max] with 0 < min <= max")
    intervals = []
    for j, iv in enumerate(doc.get("power_off", [])):
        ip = f"{p}/power_off/{j}"
        if not isinstance(iv, dict):
            _fail(ip, "must be an object")
        lo = _instant(_require(iv, "from", ip), f"{ip}/from")
        hi = _instant(_require(iv, "to", ip), f"{ip}/to")
        if lo >= hi:
            _fail(ip, "power-off interval must have from < to")
        intervals.append(PowerInterval(lo, hi))
    return Volunteer(
        id=vid,
        campaign_index=c_idx,
        home=(float(home["lon"]), float(home["lat"])),
        sensor=str(sensor),
        readings_per_hour=float(rate),
        activity_windows=tuple(windows),
        roam_deg=float(doc.get("roam_deg", 0.01)),
        jitter_deg=float(doc.get("jitter_deg", 0.0005)),
        speed_range=(float(speed[0]), float(speed[1])),
        power_off=tuple(intervals),
    )


def validate_scenario(doc) -> Scenario:
    """Validate a scenario document (dict, JSON text, or file path)."""
    if isinstance(doc, (str, Path)):
        path = Path(doc)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioInvalid("", f"cannot read scenario file: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioInvalid("", f"scenario is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        _fail("", "scenario must be a JSON object")

    seed = _int_field(doc, "seed", "", lo=0, hi=(1 << 64) - 1)
    duration = _int_field(doc, "duration_days", "", lo=1)
    tick = _int_field(doc, "tick_minutes", "", lo=1, hi=1440)
    if 1440 % tick != 0:
        _fail("/tick_minutes", f"{tick} does not divide 1440")

    sensors = _require(doc, "sensors", "")
    if not isinstance(sensors, list) or not sensors:
        _fail("/sensors", "must be a non-empty list")
    for i, s in enumerate(sensors):
        try:
            cmod.plugin_spec_from_doc(s)
        except CampaignError as exc:
            _fail(f"/sensors/{i}", f"{exc.code}: {exc}")
    sensor_ids = {s["id"] for s in sensors}

    campaigns = _require(doc, "campaigns", "")
    if not isinstance(campaigns, list) or not campaigns:
        _fail("/campaigns", "must be a non-empty list")
    for i, c in enumerate(campaigns):
        cp = f"/campaigns/{i}"
        if not isinstance(c, dict):
            _fail(cp, "must be an object")
        try:
            cmod.validate_campaign_fields(
                c.get("title"), c.get("description"), c.get("data_use"),
                c.get("results_url"),
                cmod.parse_date_range(_require(c, "date_range", cp)),
                _require(c, "tz_offset_minutes", cp))
        except CampaignError as exc:
            _fail(cp, f"{exc.code}: {exc}")
        regions = _require(c, "regions", cp)
        if not isinstance(regions, list) or not regions:
            _fail(f"{cp}/regions", "must be a non-empty list")
        for j, r in enumerate(regions):
            rp = f"{cp}/regions/{j}"
            try:
                cmod.region_from_doc(r, f"r{j + 1}")
            except CampaignError as exc:
                pointer = rp
                if exc.code in ("FEWER_THAN_THREE_VERTICES", "SELF_INTERSECTING",
                                "DUPLICATE_CONSECUTIVE_VERTEX",
                                "COORDINATE_OUT_OF_RANGE", "MALFORMED_GEOJSON"):
                    pointer = f"{rp}/polygon"
                _fail(pointer, f"{exc.code}: {exc}")
        for j, sid in enumerate(c.get("required_sensors", [])):
            if sid not in sensor_ids:
                _fail(f"{cp}/required_sensors/{j}", f"unknown sensor {sid!r}")

    volunteers_doc = _require(doc, "volunteers", "")
    if not isinstance(volunteers_doc, list):
        _fail("/volunteers", "must be a list")
    volunteers = [_volunteer(v, i, len(campaigns))
                  for i, v in enumerate(volunteers_doc)]
    seen = set()
    for i, v in enumerate(volunteers):
        if v.id in seen:
            _fail(f"/volunteers/{i}/id", f"duplicate volunteer id {v.id!r}")
        seen.add(v.id)
        if v.sensor not in sensor_ids:
            _fail(f"/volunteers/{i}/sensor", f"unknown sensor {v.sensor!r}")

    updates = []
    for i, u in enumerate(doc.get("updates", [])):
        up = f"/updates/{i}"
        if not isinstance(u, dict):
            _fail(up, "must be an object")
        at = _instant(_require(u, "at", up), f"{up}/at")
        c_idx = _int_field(u, "campaign", up, lo=0, hi=len(campaigns) - 1)
        rid = _require(u, "region", up)
        patch = _require(u, "patch", up)
        if not isinstance(patch, dict) or not patch:
            _fail(f"{up}/patch", "must be a non-empty object")
        n_regions = len(campaigns[c_idx]["regions"])
        if not (isinstance(rid, str) and rid.startswith("r")
                and rid[1:].isdigit() and 1 <= int(rid[1:]) <= n_regions):
            _fail(f"{up}/region", f"no region {rid!r} in campaign {c_idx}")
        updates.append(RegionUpdate(at, c_idx, rid, patch))
    updates.sort(key=lambda u: u.at)

    return Scenario(
        seed=seed,
        duration_days=duration,
        tick_minutes=tick,
        sensors=tuple(sensors),
        campaigns=tuple(campaigns),
        volunteers=tuple(volunteers),
        updates=tuple(updates),
        raw=doc,
    )
