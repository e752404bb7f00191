"""Planar geometry over WGS84 lon/lat degrees.

Polygons are simple (non-self-intersecting) rings of lon/lat vertices with
implicit closure; all math is planar in degree space, which is adequate at
city scale. Containment is boundary-inclusive: points within EDGE_EPS_DEG of
an edge count as inside, so a volunteer standing on a drawn border counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from .errors import (
    CoordinateOutOfRange,
    DuplicateConsecutiveVertex,
    FewerThanThreeVertices,
    MalformedGeoJson,
    SelfIntersecting,
)

# Tolerance for "on the edge" tests, in degrees (~0.1 mm at the equator).
EDGE_EPS_DEG = 1e-9


@dataclass(frozen=True)
class GeoPoint:
    lon: float
    lat: float

    def __post_init__(self):
        lon, lat = self.lon, self.lat
        if not isinstance(lon, (int, float)) or not isinstance(lat, (int, float)):
            raise CoordinateOutOfRange(f"non-numeric coordinate ({lon!r}, {lat!r})")
        lon, lat = float(lon), float(lat)
        if not (math.isfinite(lon) and math.isfinite(lat)):
            raise CoordinateOutOfRange(f"non-finite coordinate ({lon}, {lat})")
        if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
            raise CoordinateOutOfRange(f"coordinate out of range ({lon}, {lat})")
        object.__setattr__(self, "lon", lon)
        object.__setattr__(self, "lat", lat)


@dataclass(frozen=True)
class BoundingBox:
    min: GeoPoint
    max: GeoPoint

    @property
    def center(self) -> GeoPoint:
        return GeoPoint((self.min.lon + self.max.lon) / 2.0,
                        (self.min.lat + self.max.lat) / 2.0)

    def union(self, other: "BoundingBox") -> "BoundingBox":
        return BoundingBox(
            GeoPoint(min(self.min.lon, other.min.lon), min(self.min.lat, other.min.lat)),
            GeoPoint(max(self.max.lon, other.max.lon), max(self.max.lat, other.max.lat)),
        )


@dataclass(frozen=True)
class Polygon:
    """A validated simple polygon. Build through :func:`validate_polygon`."""

    vertices: tuple  # tuple[GeoPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))

    @cached_property
    def _coords(self) -> tuple:
        # flat (lon, lat) pairs, hot path for contains()
        return tuple((v.lon, v.lat) for v in self.vertices)

    @cached_property
    def bbox(self) -> BoundingBox:
        lons = [v.lon for v in self.vertices]
        lats = [v.lat for v in self.vertices]
        return BoundingBox(GeoPoint(min(lons), min(lats)), GeoPoint(max(lons), max(lats)))


def _orient(ax, ay, bx, by, cx, cy):
    """Twice the signed area of triangle abc; 0 means collinear."""
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _within_span(ax, ay, bx, by, px, py):
    # p is known collinear with a-b; is it inside the segment's bbox?
    return (min(ax, bx) <= px <= max(ax, bx)) and (min(ay, by) <= py <= max(ay, by))


def _segments_touch(ax, ay, bx, by, cx, cy, dx, dy) -> bool:
    """True when segments a-b and c-d share any point (cross or touch)."""
    d1 = _orient(cx, cy, dx, dy, ax, ay)
    d2 = _orient(cx, cy, dx, dy, bx, by)
    d3 = _orient(ax, ay, bx, by, cx, cy)
    d4 = _orient(ax, ay, bx, by, dx, dy)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and \
       ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    if d1 == 0 and _within_span(cx, cy, dx, dy, ax, ay):
        return True
    if d2 == 0 and _within_span(cx, cy, dx, dy, bx, by):
        return True
    if d3 == 0 and _within_span(ax, ay, bx, by, cx, cy):
        return True
    if d4 == 0 and _within_span(ax, ay, bx, by, dx, dy):
        return True
    return False


def validate_polygon(vertices: Iterable) -> Polygon:
    """Validate an unclosed vertex list into a simple Polygon.

    Accepts GeoPoints or (lon, lat) pairs. The closing edge last->first is
    implicit; a closed ring (first repeated) is rejected as a duplicate
    consecutive vertex. Self-intersection is checked all-pairs, O(n^2), which
    is fine for the tens-of-vertices polygons campaigns use.
    """
    pts = [v if isinstance(v, GeoPoint) else GeoPoint(v[0], v[1]) for v in vertices]
    n = len(pts)
    if n < 3:
        raise FewerThanThreeVertices(f"polygon needs at least 3 vertices, got {n}")
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        if a.lon == b.lon and a.lat == b.lat:
            raise DuplicateConsecutiveVertex(f"vertices {i} and {(i + 1) % n} are identical")
        # antimeridian-crossing edges are out of scope; reject rather than guess
        if abs(a.lon - b.lon) > 180.0:
            raise CoordinateOutOfRange(
                f"edge {i} spans more than 180 degrees of longitude")

    # adjacent edges may only meet at their shared vertex: a collinear
    # fold-back (spike) makes the boundary self-overlapping
    for i in range(n):
        p, v, q = pts[i - 1], pts[i], pts[(i + 1) % n]
        if _orient(p.lon, p.lat, v.lon, v.lat, q.lon, q.lat) == 0:
            dot = (p.lon - v.lon) * (q.lon - v.lon) + (p.lat - v.lat) * (q.lat - v.lat)
            if dot > 0:
                raise SelfIntersecting(f"edges around vertex {i} fold back on themselves")

    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            # skip adjacent pairs (they legitimately share a vertex)
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            c, d = pts[j], pts[(j + 1) % n]
            if _segments_touch(a.lon, a.lat, b.lon, b.lat, c.lon, c.lat, d.lon, d.lat):
                raise SelfIntersecting(f"edges {i} and {j} intersect")

    return Polygon(tuple(pts))


def contains(polygon: Polygon, p: GeoPoint) -> bool:
    """Boundary-inclusive point-in-polygon test (ray casting).

    Points within EDGE_EPS_DEG of any edge are inside; elsewhere the parity
    of rightward ray crossings decides. Pure and deterministic.
    """
    x, y = p.lon, p.lat
    bb = polygon.bbox
    if (x < bb.min.lon - EDGE_EPS_DEG or x > bb.max.lon + EDGE_EPS_DEG or
            y < bb.min.lat - EDGE_EPS_DEG or y > bb.max.lat + EDGE_EPS_DEG):
        return False

    eps2 = EDGE_EPS_DEG * EDGE_EPS_DEG
    coords = polygon._coords
    ax, ay = coords[-1]
    inside = False
    for bx, by in coords:
        # squared distance from p to segment a-b, inlined (hot path)
        ex, ey = bx - ax, by - ay
        t = ((x - ax) * ex + (y - ay) * ey) / (ex * ex + ey * ey)
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        qx, qy = x - (ax + t * ex), y - (ay + t * ey)
        if qx * qx + qy * qy <= eps2:
            return True
        if (ay > y) != (by > y):
            cross_x = ax + (y - ay) / (by - ay) * (bx - ax)
            if x < cross_x:
                inside = not inside
        ax, ay = bx, by
    return inside


def bounding_box(polygon: Polygon) -> BoundingBox:
    """Componentwise min/max over the polygon's vertices."""
    return polygon.bbox


def grid_cell(p: GeoPoint, origin: GeoPoint, cell_deg: float) -> tuple:
    """Half-open grid binning: a point on a cell's lower edge belongs to it."""
    if not (cell_deg > 0):
        raise ValueError(f"cell_deg must be positive, got {cell_deg}")
    col = math.floor((p.lon - origin.lon) / cell_deg)
    row = math.floor((p.lat - origin.lat) / cell_deg)
    return col, row


def polygon_to_geojson(polygon: Polygon) -> dict:
    """Serialize as a GeoJSON Polygon: one exterior ring, closed, [lon, lat]."""
    ring = [[v.lon, v.lat] for v in polygon.vertices]
    ring.append([polygon.vertices[0].lon, polygon.vertices[0].lat])
    return {"type": "Polygon", "coordinates": [ring]}


def polygon_from_geojson(doc) -> Polygon:
    """Parse and validate a GeoJSON Polygon document.

    Exactly one ring (holes unsupported), explicitly closed, [lon, lat] order.
    """
    if not isinstance(doc, dict):
        raise MalformedGeoJson("polygon must be a GeoJSON object")
    if doc.get("type") != "Polygon":
        raise MalformedGeoJson(f"expected GeoJSON type 'Polygon', got {doc.get('type')!r}")
    rings = doc.get("coordinates")
    if not isinstance(rings, (list, tuple)) or len(rings) == 0:
        raise MalformedGeoJson("missing coordinates")
    if len(rings) != 1:
        raise MalformedGeoJson("interior rings (holes) are not supported")
    ring = rings[0]
    if not isinstance(ring, (list, tuple)) or len(ring) < 4:
        raise MalformedGeoJson("ring must be a closed list of at least 4 positions")
    for pos in ring:
        if not isinstance(pos, (list, tuple)) or len(pos) != 2:
            raise MalformedGeoJson(f"positions must be [lon, lat] pairs, got {pos!r}")
    first, last = ring[0], ring[-1]
    if first[0] != last[0] or first[1] != last[1]:
        raise MalformedGeoJson("ring is not closed (first position must repeat last)")
    return validate_polygon(ring[:-1])


def points_bbox(points: Sequence[GeoPoint]) -> BoundingBox:
    lons = [p.lon for p in points]
    lats = [p.lat for p in points]
    return BoundingBox(GeoPoint(min(lons), min(lats)), GeoPoint(max(lons), max(lats)))
