"""Region recommendations: steer volunteers toward under-covered areas.

Scoring is priority × deficit / (1 + distance): monotone in each ingredient,
cheap, and safe at distance zero. Distance is Euclidean degrees from the
volunteer to the region's bounding-box center, which is adequate at city
scale. Only regions whose windows are open now or opening within the next
two hours are worth walking toward, so everything else is dropped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import geo
from .campaign import Campaign, instant_matches, minutes_until_open
from .coverage import CoverageState, region_cells
from .errors import CampaignNotRunning

LOOKAHEAD_MINUTES = 120.0


@dataclass(frozen=True)
class Recommendation:
    region_id: str
    score: float
    deficit: float
    distance_deg: float
    active_window: str  # open now, or the next to open


def recommend(campaign: Campaign, state: CoverageState, location: geo.GeoPoint,
              now_ms: int, k: int) -> list:
    """Top-k regions worth contributing to, best first.

    A region qualifies when at least one window is open at ``now`` or opens
    within the lookahead horizon. Deficit is the mean of (1 − completeness)
    over the cells of currently open windows; when none is open yet, over all
    the region's cells. Regions with nothing left to gather (zero deficit,
    which covers the all-saturated case) are omitted entirely.

    Ordering is score descending, ties by region_id ascending. When several
    windows are open the first in definition order is reported; otherwise the
    soonest-opening one (definition order breaking ties).
    """
    if campaign.status != "running":
        raise CampaignNotRunning(f"campaign {campaign.id} is {campaign.status}")
    tz = campaign.tz_offset_minutes
    date_range = campaign.date_range
    recs = []
    for region in campaign.regions:
        open_now = [w for w in region.windows
                    if instant_matches(w, now_ms, tz, date_range)]
        if open_now:
            picked = open_now[0].id
            considered = set(w.id for w in open_now)
        else:
            soonest = None
            wait = None
            for w in region.windows:
                m = minutes_until_open(w, now_ms, tz, date_range)
                if m is not None and m <= LOOKAHEAD_MINUTES and (wait is None or m < wait):
                    soonest, wait = w, m
            if soonest is None:
                continue
            picked = soonest.id
            considered = None  # fallback: every cell of the region
        cells = region_cells(region, state)
        if considered is not None:
            cells = [c for c in cells if c.window_id in considered]
        if all(c.saturated for c in cells):
            continue
        deficit = sum(1.0 - c.completeness for c in cells) / len(cells)
        if deficit <= 0.0:
            continue
        center = region.polygon.bbox.center
        distance = math.hypot(location.lon - center.lon, location.lat - center.lat)
        score = region.priority * deficit / (1.0 + distance)
        recs.append(Recommendation(region.id, score, deficit, distance, picked))
    recs.sort(key=lambda r: (-r.score, r.region_id))
    return recs[:k]


def recommendation_to_doc(rec: Recommendation) -> dict:
    return {
        "region_id": rec.region_id,
        "score": rec.score,
        "deficit": rec.deficit,
        "distance_deg": rec.distance_deg,
        "active_window": rec.active_window,
    }
