"""Spatiotemporal matching and completeness accounting.

The unit of accounting is the coverage cell: one (region, time window) pair.
A measurement feeds every cell whose polygon contains its point and whose
window matches its timestamp; overlapping regions each get a copy. Counters
update incrementally on ingest and are rebuilt from the retained measurement
store whenever constraints change, so both paths must agree bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from . import geo
from .campaign import WEEKDAY_NAMES, Campaign, Region, instant_matches
from .errors import EmptyCampaignExtent
from .timeutil import DAY_MS, format_hhmm, local_hour


@dataclass(frozen=True)
class CoverageCell:
    region_id: str
    window_id: str
    count: int
    target: int                # region quota min_count
    max_count: Optional[int]   # None = unbounded, never saturates

    @property
    def completeness(self) -> float:
        return min(1.0, self.count / self.target)

    @property
    def saturated(self) -> bool:
        return self.max_count is not None and self.count >= self.max_count


class CoverageState:
    """Mutable per-campaign counters; structure mirrors current constraints."""

    __slots__ = ("cell_counts", "hour_hist")

    def __init__(self):
        self.cell_counts: dict = {}  # (region_id, window_id) -> int
        self.hour_hist: dict = {}    # region_id -> [24 ints], local hours

    def snapshot(self) -> "CoverageState":
        dup = CoverageState()
        dup.cell_counts = dict(self.cell_counts)
        dup.hour_hist = {rid: list(h) for rid, h in self.hour_hist.items()}
        return dup


def match(campaign: Campaign, point: geo.GeoPoint, at_ms: int) -> list:
    """Cells a measurement feeds: polygon contains point AND window matches."""
    hits = []
    for region in campaign.regions:
        if not geo.contains(region.polygon, point):
            continue
        for window in region.windows:
            if instant_matches(window, at_ms, campaign.tz_offset_minutes,
                               campaign.date_range):
                hits.append((region.id, window.id))
    return hits


def apply(campaign: Campaign, state: CoverageState, point: geo.GeoPoint,
          at_ms: int) -> list:
    """Fold one accepted measurement into the counters.

    Returns the matched (region_id, window_id) pairs. The per-region hour
    histogram counts a measurement once per region it matched, bucketed by
    the campaign-local hour.
    """
    hits = []
    hour = None
    for region in campaign.regions:
        if not geo.contains(region.polygon, point):
            continue
        matched_region = False
        for window in region.windows:
            if instant_matches(window, at_ms, campaign.tz_offset_minutes,
                               campaign.date_range):
                key = (region.id, window.id)
                state.cell_counts[key] = state.cell_counts.get(key, 0) + 1
                hits.append(key)
                matched_region = True
        if matched_region:
            if hour is None:
                hour = local_hour(at_ms, campaign.tz_offset_minutes)
            hist = state.hour_hist.get(region.id)
            if hist is None:
                hist = state.hour_hist[region.id] = [0] * 24
            hist[hour] += 1
    return hits


def recount(campaign: Campaign, readings: Iterable) -> CoverageState:
    """Rebuild counters from scratch; readings are (GeoPoint, at_ms) in seq order."""
    state = CoverageState()
    for point, at_ms in readings:
        apply(campaign, state, point, at_ms)
    return state


def region_cells(region: Region, state: CoverageState) -> list:
    return [
        CoverageCell(
            region_id=region.id,
            window_id=w.id,
            count=state.cell_counts.get((region.id, w.id), 0),
            target=region.quota.min_count,
            max_count=region.quota.max_count,
        )
        for w in region.windows
    ]


def all_cells(campaign: Campaign, state: CoverageState) -> list:
    cells = []
    for region in campaign.regions:
        cells.extend(region_cells(region, state))
    return cells


def avg_completion(cells: list) -> float:
    """Unweighted mean of per-cell completeness; 0.0 with no cells."""
    if not cells:
        return 0.0
    return sum(c.completeness for c in cells) / len(cells)


def completeness_report(campaign: Campaign, state: CoverageState) -> dict:
    """Per-region cell table plus the 24-bucket local-hour histogram.

    Per-cell completeness is rounded to 4 decimals here only; everything
    aggregate (avg_completion) stays full precision.
    """
    regions_doc = []
    cells_total = 0
    completeness_sum = 0.0
    for region in campaign.regions:
        cells = region_cells(region, state)
        cells_doc = []
        for cell, window in zip(cells, region.windows):
            cells_doc.append({
                "window_id": cell.window_id,
                "start": format_hhmm(window.start_minute),
                "end": format_hhmm(window.end_minute),
                "days": [WEEKDAY_NAMES[i] for i in sorted(window.days_active)],
                "count": cell.count,
                "target": cell.target,
                "completeness": round(cell.completeness, 4),
                "saturated": cell.saturated,
            })
            completeness_sum += cell.completeness
            cells_total += 1
        regions_doc.append({
            "region_id": region.id,
            "label": region.label,
            "priority": region.priority,
            "cells": cells_doc,
            "hourly": list(state.hour_hist.get(region.id, [0] * 24)),
        })
    return {
        "campaign_id": campaign.id,
        "status": campaign.status,
        "regions": regions_doc,
        "avg_completion": (completeness_sum / cells_total) if cells_total else 0.0,
    }


def campaign_extent(campaign: Campaign, points: list) -> geo.BoundingBox:
    """Anchor box for the heatmap grid: union of region boxes, else data extent."""
    if campaign.regions:
        box = campaign.regions[0].polygon.bbox
        for region in campaign.regions[1:]:
            box = box.union(region.polygon.bbox)
        return box
    if points:
        return geo.points_bbox(points)
    raise EmptyCampaignExtent(
        f"campaign {campaign.id} has no regions and no measurements")


def heatmap(campaign: Campaign, points: list, cell_deg: float) -> dict:
    """Grid counts of ALL retained points, anchored at the extent min corner.

    Out-of-area points land in cells with negative or oversized indexes on
    purpose: the grid exists to reveal hot spots outside the defined regions.
    """
    origin = campaign_extent(campaign, points).min
    counts: dict = {}
    for p in points:
        key = geo.grid_cell(p, origin, cell_deg)
        counts[key] = counts.get(key, 0) + 1
    cells = [{"col": col, "row": row, "count": n}
             for (col, row), n in sorted(counts.items())]
    return {
        "campaign_id": campaign.id,
        "cell_deg": cell_deg,
        "origin": {"lon": origin.lon, "lat": origin.lat},
        "cells": cells,
        "total": len(points),
    }


def group_stats(entries: list, now_ms: int) -> dict:
    """Table-style statistics over a group of campaigns.

    ``entries`` rows are (campaign, state, pseudonyms, accepted, first_at):
    the distinct contributing pseudonyms, total accepted measurements and
    earliest accepted timestamp, as tracked by the store.

    experimentation_days counts whole elapsed days in the overlap of the
    group's date span and [first accepted measurement, now].
    """
    participants = 0
    regions = 0
    measurements = 0
    first_at = None
    span_start = None
    span_end = None
    completeness_sum = 0.0
    cells_total = 0
    for campaign, state, pseudonyms, accepted, c_first in entries:
        participants += len(pseudonyms)
        regions += len(campaign.regions)
        measurements += accepted
        if c_first is not None and (first_at is None or c_first < first_at):
            first_at = c_first
        start_ms, end_ms = campaign.date_range
        span_start = start_ms if span_start is None else min(span_start, start_ms)
        span_end = end_ms if span_end is None else max(span_end, end_ms)
        for cell in all_cells(campaign, state):
            completeness_sum += cell.completeness
            cells_total += 1
    if first_at is None or span_start is None:
        days = 0
    else:
        begin = max(span_start, first_at)
        finish = min(now_ms, span_end)
        days = max(0, (finish - begin) // DAY_MS)
    return {
        "cities": len(entries),
        "participants": participants,
        "regions": regions,
        "experimentation_days": days,
        "measurements": measurements,
        "avg_completion": (completeness_sum / cells_total) if cells_total else 0.0,
    }
