"""Instant handling on integer epoch milliseconds.

All internal timestamps are UTC epoch milliseconds (int); RFC 3339 text only
appears at serialization boundaries. Integer arithmetic keeps window matching
and day counting exact, which the simulator's ground-truth ledger relies on.
"""
from __future__ import annotations

import calendar
import re
import time
from datetime import datetime

from .errors import MalformedRequest

MINUTE_MS = 60_000
HOUR_MS = 3_600_000
DAY_MS = 86_400_000

_RFC3339 = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[Tt ](\d{2}):(\d{2}):(\d{2})(\.\d+)?"
    r"([Zz]|[+-]\d{2}:\d{2})$"
)
_HHMM = re.compile(r"^(\d{2}):(\d{2})$")


def parse_rfc3339(text: str) -> int:
    """Parse an RFC 3339 timestamp into epoch milliseconds (UTC)."""
    if not isinstance(text, str):
        raise MalformedRequest(f"timestamp must be a string, got {type(text).__name__}")
    m = _RFC3339.match(text)
    if not m:
        raise MalformedRequest(f"not an RFC 3339 timestamp: {text!r}")
    year, month, day, hour, minute, second = (int(g) for g in m.groups()[:6])
    frac, offset = m.group(7), m.group(8)
    try:
        # datetime only for range validation (rejects Feb 30 etc.)
        datetime(year, month, day, hour, minute, min(second, 59))
    except ValueError as exc:
        raise MalformedRequest(f"invalid timestamp {text!r}: {exc}") from exc
    sec = calendar.timegm((year, month, day, hour, minute, second, 0, 0, 0))
    ms = sec * 1000
    if frac:
        ms += round(float(frac) * 1000)
    if offset not in ("Z", "z"):
        sign = 1 if offset[0] == "+" else -1
        oh, om = int(offset[1:3]), int(offset[4:6])
        ms -= sign * (oh * 60 + om) * MINUTE_MS
    return ms


def format_rfc3339(ms: int) -> str:
    """Render epoch milliseconds as fixed-width RFC 3339 UTC text.

    Always millisecond precision with a ``Z`` suffix, so equal instants
    serialize byte-identically.
    """
    sec, msec = divmod(int(ms), 1000)
    t = time.gmtime(sec)
    return (
        f"{t.tm_year:04d}-{t.tm_mon:02d}-{t.tm_mday:02d}"
        f"T{t.tm_hour:02d}:{t.tm_min:02d}:{t.tm_sec:02d}.{msec:03d}Z"
    )


def parse_hhmm(text: str) -> int:
    """Parse "HH:MM" into a minute-of-day in 0..1440."""
    if not isinstance(text, str):
        raise MalformedRequest(f"expected HH:MM string, got {type(text).__name__}")
    m = _HHMM.match(text)
    if not m:
        raise MalformedRequest(f"not an HH:MM time: {text!r}")
    hour, minute = int(m.group(1)), int(m.group(2))
    if hour > 24 or minute > 59 or (hour == 24 and minute != 0):
        raise MalformedRequest(f"out-of-range HH:MM time: {text!r}")
    return hour * 60 + minute


def format_hhmm(minute_of_day: int) -> str:
    return f"{minute_of_day // 60:02d}:{minute_of_day % 60:02d}"


def local_minute_of_day(at_ms: int, tz_offset_minutes: int) -> int:
    """Minute of day 0..1439 in the campaign-local clock (seconds floored)."""
    local = at_ms + tz_offset_minutes * MINUTE_MS
    return (local // MINUTE_MS) % 1440


def local_weekday(at_ms: int, tz_offset_minutes: int) -> int:
    """Weekday in the campaign-local clock, 0=Mon .. 6=Sun."""
    local = at_ms + tz_offset_minutes * MINUTE_MS
    # epoch day 0 (1970-01-01) was a Thursday
    return (local // DAY_MS + 3) % 7


def local_hour(at_ms: int, tz_offset_minutes: int) -> int:
    return local_minute_of_day(at_ms, tz_offset_minutes) // 60


def now_ms() -> int:
    return int(time.time() * 1000)
