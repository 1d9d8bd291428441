import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from scenariomine.geo import (
    GeoError,
    GeoPoint,
    emit_geojson,
    global_to_vehicle_frame,
    great_circle_m,
    vehicle_frame_to_global,
)
from scenariomine.model import Scenario, ScenarioEvent, TripKey

ANN_ARBOR = GeoPoint(42.28, -83.74)


def test_zero_offset_is_identity():
    assert vehicle_frame_to_global(ANN_ARBOR, 123.0, 0.0, 0.0) == ANN_ARBOR


def test_north_ten_meters():
    p = vehicle_frame_to_global(ANN_ARBOR, 0.0, 10.0, 0.0)
    assert p.latitude - ANN_ARBOR.latitude == pytest.approx(10 / 111320, rel=1e-9)
    assert p.latitude - ANN_ARBOR.latitude == pytest.approx(8.983e-5, rel=1e-3)
    assert p.longitude == pytest.approx(ANN_ARBOR.longitude, abs=1e-15)


def test_east_ten_meters():
    p = vehicle_frame_to_global(ANN_ARBOR, 90.0, 10.0, 0.0)
    assert p.longitude - ANN_ARBOR.longitude == pytest.approx(10 / (111320 * math.cos(math.radians(42.28))), rel=1e-9)
    assert p.latitude == pytest.approx(ANN_ARBOR.latitude, abs=1e-12)


def test_left_is_west_when_heading_north():
    p = vehicle_frame_to_global(ANN_ARBOR, 0.0, 0.0, 5.0)
    assert p.longitude < ANN_ARBOR.longitude
    assert p.latitude == pytest.approx(ANN_ARBOR.latitude)


def test_target_equal_vehicle():
    assert global_to_vehicle_frame(ANN_ARBOR, 77.0, ANN_ARBOR) == (0.0, 0.0)


@pytest.mark.parametrize("lat", [89.0, -89.5, 90.0])
def test_near_pole_rejected(lat):
    with pytest.raises(GeoError):
        vehicle_frame_to_global(GeoPoint(lat, 0.0), 0.0, 1.0, 0.0)
    with pytest.raises(GeoError):
        global_to_vehicle_frame(GeoPoint(lat, 0.0), 0.0, GeoPoint(lat, 0.0))


envelope = dict(
    lat=st.floats(-60, 60), lon=st.floats(-179, 179), heading=st.floats(0, 359.999),
    d=st.floats(0, 200), l=st.floats(-200, 200),
)


@given(**envelope)
def test_round_trip(lat, lon, heading, d, l):
    v = GeoPoint(lat, lon)
    back = global_to_vehicle_frame(v, heading, vehicle_frame_to_global(v, heading, d, l))
    assert math.hypot(back[0] - d, back[1] - l) < 1e-6


@given(**envelope)
def test_distance_consistent(lat, lon, heading, d, l):
    v = GeoPoint(lat, lon)
    true = math.hypot(d, l)
    got = great_circle_m(v, vehicle_frame_to_global(v, heading, d, l))
    assert abs(got - true) <= 0.005 * true + 1e-9


def test_great_circle_one_degree_of_latitude():
    assert great_circle_m(GeoPoint(0, 0), GeoPoint(1, 0)) == pytest.approx(111195, rel=1e-4)


def _ev(i, s=Scenario.PEDESTRIAN):
    return ScenarioEvent(s, TripKey(1, 2), i, 10 * i, 10 * i + 5, obstacle_id=i)


def test_geojson_empty():
    doc, omitted = emit_geojson([], {})
    assert doc == {"type": "FeatureCollection", "features": []} and omitted == 0


def test_geojson_three_points_lon_lat():
    evs = [_ev(i) for i in range(3)]
    pos = {(e.scenario, e.key, e.event_id): GeoPoint(42.0 + e.event_id, -83.0 - e.event_id) for e in evs}
    doc, omitted = emit_geojson(evs, pos)
    assert omitted == 0
    coords = [f["geometry"]["coordinates"] for f in doc["features"]]
    assert coords == [[-83.0, 42.0], [-84.0, 43.0], [-85.0, 44.0]]
    assert doc["features"][1]["properties"] == {
        "scenario": "Pedestrian", "device": 1, "trip": 2, "event_id": 1, "start_tick": 10,
    }


def test_geojson_omits_events_without_gps():
    evs = [_ev(0), _ev(1)]
    doc, omitted = emit_geojson(evs, {(evs[0].scenario, evs[0].key, 0): ANN_ARBOR})
    assert len(doc["features"]) == 1 and omitted == 1
