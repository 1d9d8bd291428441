"""Vehicle-frame <-> global coordinates and GeoJSON export.

The vehicle frame has +forward along the heading (degrees clockwise from
true north) and +lateral to the left.  Offsets are converted with a local
equirectangular approximation, which at sensor ranges (<= ~200 m) is far
inside GPS noise.
"""
from __future__ import annotations

import math
from typing import Iterable, Mapping, NamedTuple, Optional

METERS_PER_DEG = 111320.0
EARTH_RADIUS_M = 6371008.8
MAX_ABS_LAT = 89.0


class GeoError(ValueError):
    pass


class GeoPoint(NamedTuple):
    latitude: float
    longitude: float


def _check_lat(lat: float) -> float:
    if not abs(lat) < MAX_ABS_LAT:
        raise GeoError(f"latitude {lat} too close to a pole for the local approximation")
    return math.cos(math.radians(lat))


def vehicle_frame_to_global(vehicle: GeoPoint, heading: float, range_d: float, lateral_l: float) -> GeoPoint:
    coslat = _check_lat(vehicle.latitude)
    h = math.radians(heading)
    sin_h, cos_h = math.sin(h), math.cos(h)
    north = range_d * cos_h + lateral_l * sin_h
    east = range_d * sin_h - lateral_l * cos_h
    return GeoPoint(
        vehicle.latitude + north / METERS_PER_DEG,
        vehicle.longitude + east / (METERS_PER_DEG * coslat),
    )


def global_to_vehicle_frame(vehicle: GeoPoint, heading: float, target: GeoPoint) -> tuple[float, float]:
    """Inverse of :func:`vehicle_frame_to_global`; returns (range_d, lateral_l)."""
    coslat = _check_lat(vehicle.latitude)
    north = (target.latitude - vehicle.latitude) * METERS_PER_DEG
    east = (target.longitude - vehicle.longitude) * METERS_PER_DEG * coslat
    h = math.radians(heading)
    sin_h, cos_h = math.sin(h), math.cos(h)
    return north * cos_h + east * sin_h, north * sin_h - east * cos_h


def great_circle_m(a: GeoPoint, b: GeoPoint) -> float:
    """Haversine distance on a sphere of mean Earth radius."""
    p1, p2 = math.radians(a.latitude), math.radians(b.latitude)
    dp = p2 - p1
    dl = math.radians(b.longitude - a.longitude)
    s = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(s)))


def emit_geojson(events: Iterable, positions: Mapping) -> tuple[dict, int]:
    """Point FeatureCollection for ``events``; positions maps an event's
    (scenario, key, event_id) to its start GeoPoint.

    Returns the document and the number of events omitted for lack of GPS.
    """
    features = []
    omitted = 0
    for ev in events:
        p: Optional[GeoPoint] = positions.get((ev.scenario, ev.key, ev.event_id))
        if p is None:
            omitted += 1
            continue
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [p.longitude, p.latitude]},
            "properties": {
                "scenario": ev.scenario.title,
                "device": ev.key.device,
                "trip": ev.key.trip,
                "event_id": ev.event_id,
                "start_tick": ev.start_tick,
            },
        })
    return {"type": "FeatureCollection", "features": features}, omitted
