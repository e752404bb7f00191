"""Ground-truth accounting for simulation runs.

This is a deliberate second implementation of acceptance, matching and
counting: straight loops over raw scenario JSON and the emitted reading
records, importing nothing from the engine under test. Numeric conventions
(half-open windows, 1e-9 boundary tolerance, min(1, count/target)) follow
the same published contract the engine implements, expressed in fresh code.

A reading is accepted iff its tick was not inside a scheduled power-off
interval; the driver toggles power at tick starts, so acceptance is purely
a function of tick_start. Cell counts are computed under the FINAL region
definitions (all patches applied), mirroring the recount-on-redefinition
rule over retained measurements.
"""
from __future__ import annotations

import time
from datetime import datetime, timezone

_DAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
_EDGE_EPS = 1e-9
_DAY_MS = 86_400_000


def _instant_ms(text: str) -> int:
    dt = datetime.strptime(text, "%Y-%m-%dT%H:%M:%S.%fZ")
    return round(dt.replace(tzinfo=timezone.utc).timestamp() * 1000)


def _minute_of_day(text: str) -> int:
    return int(text[:2]) * 60 + int(text[3:5])


def _local_clock(at_ms: int, tz_offset_minutes: int) -> tuple:
    """(minute of day, weekday Mon=0, hour) on the campaign-local clock."""
    t = time.gmtime((at_ms + tz_offset_minutes * 60_000) // 1000)
    return t.tm_hour * 60 + t.tm_min, t.tm_wday, t.tm_hour


def _point_on_or_in(vertices: list, x: float, y: float) -> bool:
    """Crossing-number containment, boundary-inclusive within 1e-9 degrees."""
    n = len(vertices)
    for i in range(n):
        ax, ay = vertices[i - 1]
        bx, by = vertices[i]
        ex, ey = bx - ax, by - ay
        t = ((x - ax) * ex + (y - ay) * ey) / (ex * ex + ey * ey)
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        dx, dy = x - (ax + t * ex), y - (ay + t * ey)
        if dx * dx + dy * dy <= _EDGE_EPS * _EDGE_EPS:
            return True
    crossings = 0
    for i in range(n):
        ax, ay = vertices[i - 1]
        bx, by = vertices[i]
        if (ay > y) != (by > y):
            cross_x = ax + (y - ay) / (by - ay) * (bx - ax)
            if x < cross_x:
                crossings += 1
    return crossings % 2 == 1


class _Window:
    __slots__ = ("wid", "start", "end", "days")

    def __init__(self, wid: str, doc: dict):
        self.wid = wid
        self.start = _minute_of_day(doc["start"])
        self.end = _minute_of_day(doc["end"]) or 1440
        days = doc.get("days")
        if days is None:
            self.days = set(range(7))
        else:
            self.days = {_DAY_NAMES.index(d) for d in days}


class _Region:
    __slots__ = ("rid", "vertices", "windows", "target", "max_count")

    def __init__(self, rid: str, doc: dict):
        self.rid = rid
        ring = doc["polygon"]["coordinates"][0]
        self.vertices = [(float(lon), float(lat)) for lon, lat in ring[:-1]]
        self.windows = [_Window(f"w{k + 1}", w)
                        for k, w in enumerate(doc["windows"])]
        self.target = doc["quota"]["min_count"]
        self.max_count = doc["quota"].get("max_count")


def _final_regions(scenario_raw: dict) -> list:
    """Per campaign: region docs with every scheduled patch folded in."""
    campaigns = [
        {f"r{j + 1}": dict(region)
         for j, region in enumerate(c["regions"])}
        for c in scenario_raw["campaigns"]
    ]
    for update in scenario_raw.get("updates", []):
        target = campaigns[update["campaign"]][update["region"]]
        for key, value in update["patch"].items():
            target[key] = value
    return [
        [_Region(rid, doc) for rid, doc in regions.items()]
        for regions in campaigns
    ]


def compute(scenario_raw: dict, readings: list) -> dict:
    """Fold the emitted readings into the expected service-side numbers.

    ``readings`` rows: {vol, vol_id, campaign, at, lon, lat, tick_start},
    one per emitted reading, in emission order. experimentation_days assumes
    the scenario is dated in the past at verification time (the service
    clamps its day counter at now, the ledger at the date-range end).
    """
    campaigns_raw = scenario_raw["campaigns"]
    volunteers_raw = scenario_raw["volunteers"]
    regions_per_campaign = _final_regions(scenario_raw)
    offsets = [c["tz_offset_minutes"] for c in campaigns_raw]
    ranges = [(_instant_ms(c["date_range"]["start"]),
               _instant_ms(c["date_range"]["end"])) for c in campaigns_raw]
    off_intervals = [
        [(_instant_ms(iv["from"]), _instant_ms(iv["to"]))
         for iv in v.get("power_off", [])]
        for v in volunteers_raw
    ]

    cells = [{(r.rid, w.wid): 0 for r in regions for w in r.windows}
             for regions in regions_per_campaign]
    hourly = [{r.rid: [0] * 24 for r in regions}
              for regions in regions_per_campaign]
    contributors = [set() for _ in campaigns_raw]
    accepted_per_campaign = [0] * len(campaigns_raw)
    per_volunteer = {v["id"]: {"accepted": 0, "rejected_power_off": 0}
                     for v in volunteers_raw}
    first_at = None

    for reading in readings:
        vol = reading["vol"]
        ci = reading["campaign"]
        at = reading["at"]
        tick = reading["tick_start"]
        row = per_volunteer[reading["vol_id"]]
        if any(lo <= tick < hi for lo, hi in off_intervals[vol]):
            row["rejected_power_off"] += 1
            continue
        row["accepted"] += 1
        accepted_per_campaign[ci] += 1
        contributors[ci].add(vol)
        if first_at is None or at < first_at:
            first_at = at
        start_ms, end_ms = ranges[ci]
        in_range = start_ms <= at < end_ms
        minute, wday, hour = _local_clock(at, offsets[ci])
        x, y = reading["lon"], reading["lat"]
        for region in regions_per_campaign[ci]:
            if not _point_on_or_in(region.vertices, x, y):
                continue
            hit = False
            for w in region.windows:
                if (in_range and w.start <= minute < w.end and wday in w.days):
                    cells[ci][(region.rid, w.wid)] += 1
                    hit = True
            if hit:
                hourly[ci][region.rid][hour] += 1

    completeness_sum = 0.0
    n_cells = 0
    campaign_docs = []
    for ci in range(len(campaigns_raw)):
        cell_doc = {}
        for r in regions_per_campaign[ci]:
            for w in r.windows:
                count = cells[ci][(r.rid, w.wid)]
                completeness_sum += min(1.0, count / r.target)
                n_cells += 1
                cell_doc[f"{r.rid}/{w.wid}"] = count
        campaign_docs.append({
            "cells": cell_doc,
            "hourly": hourly[ci],
            "participants": len(contributors[ci]),
            "accepted": accepted_per_campaign[ci],
        })

    span_start = min(r[0] for r in ranges)
    span_end = max(r[1] for r in ranges)
    if first_at is None:
        days = 0
    else:
        days = max(0, (span_end - max(span_start, first_at)) // _DAY_MS)

    return {
        "campaigns": campaign_docs,
        "per_volunteer": per_volunteer,
        "stats": {
            "cities": len(campaigns_raw),
            "participants": sum(len(c) for c in contributors),
            "regions": sum(len(r) for r in regions_per_campaign),
            "experimentation_days": days,
            "measurements": sum(accepted_per_campaign),
            "avg_completion": (completeness_sum / n_cells) if n_cells else 0.0,
        },
    }
