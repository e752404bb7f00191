"""Campaign domain model: metadata, regions, time windows, quotas, plugins.

A campaign walks draft -> validated -> running <-> paused -> completed.
Regions carry a polygon, recurring daily time windows (campaign-local clock
via a fixed UTC offset), a min/max quota and a priority. Constraints may be
redefined at any time before completion; the owning service recounts coverage
from retained measurements after every change.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

from . import geo
from .errors import (
    ChecksumMismatch,
    EmptyRequiredField,
    IllegalTransition,
    InvalidDateRange,
    InvalidPriority,
    InvalidQuota,
    InvalidWindow,
    MalformedRequest,
)
from .timeutil import (
    DAY_MS,
    MINUTE_MS,
    format_hhmm,
    format_rfc3339,
    local_minute_of_day,
    local_weekday,
    parse_hhmm,
    parse_rfc3339,
)

WEEKDAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")

STATUSES = ("draft", "validated", "running", "paused", "completed")

# set_status may only walk these edges; draft -> validated happens exclusively
# through experiment-plugin attachment (workflow step "upload" gates it)
SET_STATUS_EDGES = frozenset({
    ("validated", "running"),
    ("running", "paused"),
    ("paused", "running"),
    ("running", "completed"),
    ("paused", "completed"),
})


@dataclass(frozen=True)
class TimeWindow:
    """Recurring daily window in campaign-local minutes, half-open [start, end)."""

    id: str
    start_minute: int  # 0..1439
    end_minute: int    # 1..1440, strictly greater than start (no wrap)
    days_active: frozenset  # weekday indexes, 0=Mon .. 6=Sun


@dataclass(frozen=True)
class Quota:
    min_count: int            # completeness target, >= 1
    max_count: Optional[int]  # saturation cap; None = unbounded


@dataclass(frozen=True)
class Region:
    id: str
    label: str
    polygon: geo.Polygon
    windows: tuple  # tuple[TimeWindow, ...], non-empty
    quota: Quota
    priority: float


@dataclass(frozen=True)
class SensorPluginSpec:
    id: str
    name: str
    modality: str
    public: bool


@dataclass(frozen=True)
class ExperimentPluginSpec:
    id: str
    version: str
    checksum: str  # lowercase hex sha256 of the uploaded artifact
    required_sensors: tuple


@dataclass
class Campaign:
    id: str
    title: str
    description: str
    data_use: str
    results_url: str
    date_range: tuple  # (start_ms, end_ms), half-open
    tz_offset_minutes: int
    secret: bytes  # 32-byte anonymization key; never serialized
    required_sensor_plugins: list = field(default_factory=list)
    experiment_plugin: Optional[ExperimentPluginSpec] = None
    status: str = "draft"
    regions: list = field(default_factory=list)

    def region_by_id(self, region_id: str) -> Optional[Region]:
        for r in self.regions:
            if r.id == region_id:
                return r
        return None


# --- validation -------------------------------------------------------------

def validate_campaign_fields(title, description, data_use, results_url,
                             date_range, tz_offset_minutes) -> tuple:
    """Check the volunteer-facing metadata and return (start_ms, end_ms).

    Every text field must be non-empty before a campaign can leave draft:
    volunteers see all of it and must understand what runs on their phone.
    """
    for name, value in (("title", title), ("description", description),
                        ("data_use", data_use), ("results_url", results_url)):
        if not isinstance(value, str) or not value.strip():
            raise EmptyRequiredField(f"{name} must be a non-empty string")
    start_ms, end_ms = date_range
    if start_ms >= end_ms:
        raise InvalidDateRange("date_range start must precede end")
    if not isinstance(tz_offset_minutes, int) or isinstance(tz_offset_minutes, bool):
        raise MalformedRequest("tz_offset_minutes must be an integer")
    return (start_ms, end_ms)


def build_window(wid: str, start_minute: int, end_minute: int, days) -> TimeWindow:
    if not (0 <= start_minute <= 1439):
        raise InvalidWindow(f"start minute {start_minute} out of range 0..1439")
    if not (1 <= end_minute <= 1440):
        raise InvalidWindow(f"end minute {end_minute} out of range 1..1440")
    if start_minute >= end_minute:
        raise InvalidWindow(
            "window start must precede end (express a wrapping window as two windows)")
    days = frozenset(days)
    if not days:
        raise InvalidWindow("days_active must not be empty")
    if not days.issubset(range(7)):
        raise InvalidWindow(f"invalid weekday indexes: {sorted(days)}")
    return TimeWindow(wid, start_minute, end_minute, days)


def build_quota(min_count, max_count) -> Quota:
    if not isinstance(min_count, int) or isinstance(min_count, bool) or min_count < 1:
        raise InvalidQuota(f"min_count must be an integer >= 1, got {min_count!r}")
    if max_count is not None:
        if not isinstance(max_count, int) or isinstance(max_count, bool):
            raise InvalidQuota(f"max_count must be an integer or null, got {max_count!r}")
        if max_count < min_count:
            raise InvalidQuota(f"max_count {max_count} below min_count {min_count}")
    return Quota(min_count, max_count)


def build_region(rid: str, label: str, polygon: geo.Polygon, windows, quota: Quota,
                 priority: float) -> Region:
    if not isinstance(label, str) or not label.strip():
        raise EmptyRequiredField("region label must be a non-empty string")
    windows = tuple(windows)
    if not windows:
        raise InvalidWindow("region needs at least one time window")
    if not isinstance(priority, (int, float)) or isinstance(priority, bool):
        raise InvalidPriority(f"priority must be a number, got {priority!r}")
    priority = float(priority)
    if not math.isfinite(priority) or priority <= 0:
        raise InvalidPriority(f"priority must be finite and positive, got {priority}")
    return Region(rid, label, polygon, windows, quota, priority)


def check_transition(current: str, target: str) -> None:
    if target not in STATUSES:
        raise MalformedRequest(f"unknown status {target!r}")
    if current == "draft" and target == "validated":
        raise IllegalTransition(
            "draft campaigns validate by attaching the experiment plugin")
    if (current, target) not in SET_STATUS_EDGES:
        raise IllegalTransition(f"cannot move {current} -> {target}")


def artifact_checksum(artifact: bytes) -> str:
    return hashlib.sha256(artifact).hexdigest()


def verify_artifact(spec: ExperimentPluginSpec, artifact: bytes) -> None:
    actual = artifact_checksum(artifact)
    if actual != spec.checksum:
        raise ChecksumMismatch(
            f"artifact digest {actual} does not match declared {spec.checksum}")


# --- temporal matching --------------------------------------------------------

def instant_matches(window: TimeWindow, at_ms: int, tz_offset_minutes: int,
                    date_range) -> bool:
    """Does an instant satisfy a window under the campaign-local clock?

    True iff at is inside the campaign date range [start, end), the local
    minute-of-day falls in [window.start, window.end) and the local weekday
    is active. Half-open ends avoid double counting at boundaries.
    """
    start_ms, end_ms = date_range
    if not (start_ms <= at_ms < end_ms):
        return False
    minute = local_minute_of_day(at_ms, tz_offset_minutes)
    if not (window.start_minute <= minute < window.end_minute):
        return False
    return local_weekday(at_ms, tz_offset_minutes) in window.days_active


def minutes_until_open(window: TimeWindow, now_ms: int, tz_offset_minutes: int,
                       date_range) -> Optional[float]:
    """Minutes until the window next opens at or after now, or None.

    0.0 means open right now. Looks at most 8 days ahead, enough to cover any
    days_active pattern; openings outside the campaign date range don't count.
    """
    if instant_matches(window, now_ms, tz_offset_minutes, date_range):
        return 0.0
    local = now_ms + tz_offset_minutes * MINUTE_MS
    day_start_local = (local // DAY_MS) * DAY_MS
    for day_offset in range(0, 9):
        candidate_local = day_start_local + day_offset * DAY_MS + window.start_minute * MINUTE_MS
        candidate = candidate_local - tz_offset_minutes * MINUTE_MS
        if candidate < now_ms:
            continue
        if instant_matches(window, candidate, tz_offset_minutes, date_range):
            return (candidate - now_ms) / MINUTE_MS
    return None


# --- (de)serialization ---------------------------------------------------------

def window_to_doc(w: TimeWindow) -> dict:
    return {
        "id": w.id,
        "start": format_hhmm(w.start_minute),
        "end": format_hhmm(w.end_minute),
        "days": [WEEKDAY_NAMES[i] for i in sorted(w.days_active)],
    }


def window_from_doc(doc, wid: str) -> TimeWindow:
    if not isinstance(doc, dict):
        raise MalformedRequest("window must be an object")
    unknown = set(doc) - {"id", "start", "end", "days"}
    if unknown:
        raise MalformedRequest(f"unknown window fields: {sorted(unknown)}")
    if "start" not in doc or "end" not in doc:
        raise MalformedRequest("window needs 'start' and 'end' HH:MM times")
    start = parse_hhmm(doc["start"])
    end = parse_hhmm(doc["end"])
    if end == 0:
        end = 1440  # "24:00" and "00:00" both mean end of day in the end slot
    days_doc = doc.get("days")
    if days_doc is None:
        days = range(7)
    else:
        if not isinstance(days_doc, list) or not days_doc:
            raise InvalidWindow("days must be a non-empty list of weekday names")
        days = []
        for d in days_doc:
            if d not in WEEKDAY_NAMES:
                raise InvalidWindow(f"unknown weekday {d!r}")
            days.append(WEEKDAY_NAMES.index(d))
    return build_window(wid, start, end, days)


def quota_from_doc(doc) -> Quota:
    if not isinstance(doc, dict):
        raise MalformedRequest("quota must be an object")
    unknown = set(doc) - {"min_count", "max_count"}
    if unknown:
        raise MalformedRequest(f"unknown quota fields: {sorted(unknown)}")
    if "min_count" not in doc:
        raise InvalidQuota("quota needs min_count")
    return build_quota(doc["min_count"], doc.get("max_count"))


def quota_to_doc(q: Quota) -> dict:
    return {"min_count": q.min_count, "max_count": q.max_count}


def region_to_doc(r: Region) -> dict:
    return {
        "id": r.id,
        "label": r.label,
        "polygon": geo.polygon_to_geojson(r.polygon),
        "windows": [window_to_doc(w) for w in r.windows],
        "quota": quota_to_doc(r.quota),
        "priority": r.priority,
    }


def region_from_doc(doc, rid: str) -> Region:
    if not isinstance(doc, dict):
        raise MalformedRequest("region must be an object")
    unknown = set(doc) - {"id", "label", "polygon", "windows", "quota", "priority"}
    if unknown:
        raise MalformedRequest(f"unknown region fields: {sorted(unknown)}")
    for key in ("label", "polygon", "windows", "quota"):
        if key not in doc:
            raise MalformedRequest(f"region needs {key!r}")
    polygon = geo.polygon_from_geojson(doc["polygon"])
    windows_doc = doc["windows"]
    if not isinstance(windows_doc, list):
        raise MalformedRequest("windows must be a list")
    windows = [window_from_doc(w, f"w{i + 1}") for i, w in enumerate(windows_doc)]
    quota = quota_from_doc(doc["quota"])
    priority = doc.get("priority", 1.0)
    return build_region(rid, doc["label"], polygon, windows, quota, priority)


def plugin_spec_from_doc(doc) -> SensorPluginSpec:
    if not isinstance(doc, dict):
        raise MalformedRequest("plugin spec must be an object")
    for key in ("id", "name", "modality"):
        value = doc.get(key)
        if not isinstance(value, str) or not value.strip():
            raise EmptyRequiredField(f"plugin {key} must be a non-empty string")
    public = doc.get("public", False)
    if not isinstance(public, bool):
        raise MalformedRequest("plugin 'public' must be a boolean")
    return SensorPluginSpec(doc["id"], doc["name"], doc["modality"], public)


def plugin_spec_to_doc(spec: SensorPluginSpec) -> dict:
    return {"id": spec.id, "name": spec.name, "modality": spec.modality,
            "public": spec.public}


def experiment_plugin_to_doc(spec: ExperimentPluginSpec) -> dict:
    return {"id": spec.id, "version": spec.version, "checksum": spec.checksum,
            "required_sensors": list(spec.required_sensors)}


def campaign_to_doc(c: Campaign) -> dict:
    """Canonical JSON document; the anonymization secret never leaves here."""
    return {
        "id": c.id,
        "title": c.title,
        "description": c.description,
        "data_use": c.data_use,
        "results_url": c.results_url,
        "date_range": {"start": format_rfc3339(c.date_range[0]),
                       "end": format_rfc3339(c.date_range[1])},
        "tz_offset_minutes": c.tz_offset_minutes,
        "required_sensor_plugins": list(c.required_sensor_plugins),
        "experiment_plugin": (experiment_plugin_to_doc(c.experiment_plugin)
                              if c.experiment_plugin else None),
        "status": c.status,
        "regions": [region_to_doc(r) for r in c.regions],
    }


def parse_date_range(doc) -> tuple:
    if not isinstance(doc, dict) or "start" not in doc or "end" not in doc:
        raise MalformedRequest("date_range must be {start, end} RFC 3339 instants")
    return (parse_rfc3339(doc["start"]), parse_rfc3339(doc["end"]))
