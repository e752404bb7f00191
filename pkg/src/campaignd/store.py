"""Measurement intake, volunteer state, anonymization and export codecs.

Accepted readings are retained forever, in or out of area ("kept in the
system"); rejected ones are only counted in the batch response. Volunteers
exist downstream only as per-campaign HMAC pseudonyms, so exports can be
handed to experimenters without a scrubbing pass.
"""
from __future__ import annotations

import csv
import hashlib
import hmac
import io
import json
import re
from dataclasses import dataclass, field
from typing import Optional

from . import geo
from .campaign import Campaign
from .errors import (
    CampaignError,
    CampaignNotRunning,
    FutureTimestamp,
    InvalidCoordinates,
    InvalidPseudonym,
    MalformedRequest,
    SensorNotEnabled,
    UnknownFormat,
    ValueTooLarge,
    VolunteerNotJoined,
    VolunteerPoweredOff,
)
from .timeutil import HOUR_MS, format_rfc3339, parse_rfc3339

MAX_VALUE_BYTES = 4096
FUTURE_SLACK_MS = 24 * HOUR_MS

CSV_HEADER = ("campaign_id", "volunteer", "sensor_id", "timestamp_utc",
              "lon", "lat", "value")

_PSEUDONYM = re.compile(r"^[0-9a-f]{16}$")


@dataclass(frozen=True)
class Measurement:
    campaign_id: str
    volunteer_pseudonym: str
    sensor_id: str
    at: int  # epoch ms UTC
    point: geo.GeoPoint
    value: str
    seq: int


@dataclass
class VolunteerState:
    raw_id: str
    powered_on: bool = True
    enabled_sensors: set = field(default_factory=set)
    joined_campaigns: set = field(default_factory=set)


def anonymize(raw_id: str, campaign_secret: bytes) -> str:
    """Keyed pseudonym: HMAC-SHA-256 under the campaign secret, 16 hex chars.

    Deterministic per (raw_id, campaign), unlinkable across campaigns, and
    64 bits is plenty against collisions at campaign scale.
    """
    mac = hmac.new(campaign_secret, raw_id.encode("utf-8"), hashlib.sha256)
    return mac.hexdigest()[:16]


def is_pseudonym(text) -> bool:
    return isinstance(text, str) and bool(_PSEUDONYM.match(text))


class CampaignStore:
    """Retained measurements for one campaign plus contributor tallies."""

    __slots__ = ("measurements", "by_pseudonym", "first_at")

    def __init__(self):
        self.measurements: list = []
        # pseudonym -> [accepted count, first at, last at]
        self.by_pseudonym: dict = {}
        self.first_at: Optional[int] = None

    def add(self, m: Measurement) -> None:
        self.measurements.append(m)
        row = self.by_pseudonym.get(m.volunteer_pseudonym)
        if row is None:
            self.by_pseudonym[m.volunteer_pseudonym] = [1, m.at, m.at]
        else:
            row[0] += 1
            if m.at < row[1]:
                row[1] = m.at
            if m.at > row[2]:
                row[2] = m.at
        if self.first_at is None or m.at < self.first_at:
            self.first_at = m.at

    def ordered(self) -> list:
        return sorted(self.measurements, key=lambda m: (m.at, m.seq))


# --- per-reading validation ---------------------------------------------------

def parse_reading(doc) -> dict:
    """Shape-check one reading document; raises before any state is touched."""
    if not isinstance(doc, dict):
        raise MalformedRequest("reading must be an object")
    unknown = set(doc) - {"sensor_id", "at", "lon", "lat", "value"}
    if unknown:
        raise MalformedRequest(f"unknown reading fields: {sorted(unknown)}")
    for key in ("sensor_id", "at", "lon", "lat", "value"):
        if key not in doc:
            raise MalformedRequest(f"reading needs {key!r}")
    sensor_id = doc["sensor_id"]
    if not isinstance(sensor_id, str) or not sensor_id:
        raise MalformedRequest("sensor_id must be a non-empty string")
    at_ms = parse_rfc3339(doc["at"])
    value = doc["value"]
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise MalformedRequest("value must be text or a number")
    if not isinstance(value, str):
        value = repr(value) if isinstance(value, float) else str(value)
    if len(value.encode("utf-8")) > MAX_VALUE_BYTES:
        raise ValueTooLarge(f"value exceeds {MAX_VALUE_BYTES} bytes")
    return {"sensor_id": sensor_id, "at": at_ms, "lon": doc["lon"],
            "lat": doc["lat"], "value": value}


def check_acceptance(campaign: Campaign, volunteer: VolunteerState,
                     sensor_id: str, at_ms: int, lon, lat,
                     now_ms: int) -> geo.GeoPoint:
    """Gate one reading; returns the parsed point or raises the rejection."""
    if campaign.status != "running":
        raise CampaignNotRunning(f"campaign {campaign.id} is {campaign.status}")
    if not volunteer.powered_on:
        raise VolunteerPoweredOff("volunteer has data collection powered off")
    if sensor_id not in volunteer.enabled_sensors:
        raise SensorNotEnabled(f"sensor {sensor_id} not enabled by volunteer")
    if campaign.id not in volunteer.joined_campaigns:
        raise VolunteerNotJoined(f"volunteer has not joined {campaign.id}")
    if at_ms > now_ms + FUTURE_SLACK_MS:
        raise FutureTimestamp("timestamp more than 24h ahead of server clock")
    try:
        return geo.GeoPoint(lon, lat)
    except CampaignError as exc:
        raise InvalidCoordinates(str(exc)) from exc


def check_import_acceptance(campaign: Campaign, pseudonym, at_ms: int, lon, lat,
                            value, now_ms: int) -> geo.GeoPoint:
    """Acceptance gate for already-pseudonymous readings (export round-trips).

    Volunteer-state checks don't apply: the device-side story already
    happened wherever this export came from.
    """
    if campaign.status != "running":
        raise CampaignNotRunning(f"campaign {campaign.id} is {campaign.status}")
    if not is_pseudonym(pseudonym):
        raise InvalidPseudonym("volunteer must be a 16-char lowercase hex token")
    if at_ms > now_ms + FUTURE_SLACK_MS:
        raise FutureTimestamp("timestamp more than 24h ahead of server clock")
    if not isinstance(value, str):
        raise MalformedRequest("value must be text")
    if len(value.encode("utf-8")) > MAX_VALUE_BYTES:
        raise ValueTooLarge(f"value exceeds {MAX_VALUE_BYTES} bytes")
    try:
        return geo.GeoPoint(lon, lat)
    except CampaignError as exc:
        raise InvalidCoordinates(str(exc)) from exc


# --- export / import ------------------------------------------------------------

def measurement_row(m: Measurement) -> dict:
    return {
        "campaign_id": m.campaign_id,
        "volunteer": m.volunteer_pseudonym,
        "sensor_id": m.sensor_id,
        "timestamp_utc": format_rfc3339(m.at),
        "lon": m.point.lon,
        "lat": m.point.lat,
        "value": m.value,
    }


def export_bytes(store: CampaignStore, fmt: str) -> bytes:
    """Serialize every retained measurement, ordered by (at, seq).

    Output is byte-stable for a fixed store state: fixed field order, fixed
    timestamp width, repr floats, LF endings.
    """
    rows = [measurement_row(m) for m in store.ordered()]
    if fmt == "json":
        return json.dumps(rows, separators=(",", ":")).encode("utf-8")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([row["campaign_id"], row["volunteer"],
                             row["sensor_id"], row["timestamp_utc"],
                             repr(row["lon"]), repr(row["lat"]), row["value"]])
        return buf.getvalue().encode("utf-8")
    raise UnknownFormat(f"unknown export format {fmt!r}")


def parse_export(data: bytes, fmt: str) -> list:
    """Decode an export back into reading documents, file order preserved."""
    if fmt == "json":
        try:
            rows = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedRequest(f"not valid JSON export data: {exc}") from exc
        if not isinstance(rows, list):
            raise MalformedRequest("JSON export must be an array")
    elif fmt == "csv":
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedRequest(f"not UTF-8 CSV data: {exc}") from exc
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRequest("CSV export is missing its header") from None
        if tuple(header) != CSV_HEADER:
            raise MalformedRequest(f"unexpected CSV header: {header}")
        rows = []
        for line in reader:
            if len(line) != len(CSV_HEADER):
                raise MalformedRequest(f"CSV row has {len(line)} fields")
            rows.append(dict(zip(CSV_HEADER, line)))
    else:
        raise UnknownFormat(f"unknown export format {fmt!r}")

    readings = []
    for i, row in enumerate(rows):
        if not isinstance(row, dict):
            raise MalformedRequest(f"row {i} is not an object")
        try:
            readings.append({
                "volunteer": row["volunteer"],
                "sensor_id": row["sensor_id"],
                "at": parse_rfc3339(row["timestamp_utc"]),
                "lon": float(row["lon"]),
                "lat": float(row["lat"]),
                "value": str(row["value"]),
            })
        except KeyError as exc:
            raise MalformedRequest(f"row {i} is missing {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise MalformedRequest(f"row {i}: {exc}") from exc
    return readings


def points_payload(store: CampaignStore) -> dict:
    """Raw retained points for the map's dot view."""
    rows = [{"lon": m.point.lon, "lat": m.point.lat,
             "at": format_rfc3339(m.at), "sensor_id": m.sensor_id}
            for m in store.ordered()]
    return {"points": rows, "total": len(rows)}
