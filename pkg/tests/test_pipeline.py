import filecmp
import json

import pytest

from scenariomine import tables
from scenariomine.model import Direction, Scenario, ScenarioEvent, TripKey
from scenariomine.pipeline import MissingTableError, run_extract
from scenariomine.synth.generate import random_spec, write_dataset


@pytest.fixture(scope="module")
def raw(tmp_path_factory):
    d = tmp_path_factory.mktemp("raw")
    write_dataset(d, [random_spec(s) for s in range(6)])
    return d


def _same_tree(a, b):
    names = sorted(p.name for p in a.iterdir() if p.name != "manifest.json")
    assert names == sorted(p.name for p in b.iterdir() if p.name != "manifest.json")
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert mismatch == [] and errors == []


def test_jobs_do_not_change_output(raw, tmp_path):
    run_extract(raw, tmp_path / "one", jobs=1)
    run_extract(raw, tmp_path / "three", jobs=3)
    _same_tree(tmp_path / "one", tmp_path / "three")


def test_spilling_does_not_change_output(raw, tmp_path):
    run_extract(raw, tmp_path / "mem", jobs=1)
    run_extract(raw, tmp_path / "disk", jobs=1, spill_threshold=500)
    _same_tree(tmp_path / "mem", tmp_path / "disk")


def test_manifest_reconciles(raw, tmp_path):
    m = run_extract(raw, tmp_path, jobs=1)
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["trips"] == 6 == m.trips
    assert set(doc["inputs"]) == {"DataWsu.csv", "DataFrontTargets.csv", "DataLane.csv", "TripSummary.csv"}
    for s in Scenario:
        assert doc["events"][s.slug] == len(tables.read_events(tmp_path, s))
        assert doc["sequence_rows"][s.slug] == sum(1 for _ in tables.iter_sequence(tmp_path, s))
    stats = (tmp_path / "stats.csv").read_text().splitlines()
    assert stats[-1] == f"Sum,{sum(doc['events'].values())}"
    assert doc["config"]["half_width_m"] == 0.91


def test_summary_table_optional(raw, tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    for name in ("DataWsu.csv", "DataFrontTargets.csv", "DataLane.csv"):
        (src / name).write_bytes((raw / name).read_bytes())
    m = run_extract(src, tmp_path / "out", jobs=1)
    assert m.trips == 6 and "TripSummary.csv" not in m.inputs


def test_missing_lane_table(raw, tmp_path):
    (tmp_path / "DataWsu.csv").write_bytes((raw / "DataWsu.csv").read_bytes())
    with pytest.raises(MissingTableError, match="DataFrontTargets.csv"):
        run_extract(tmp_path, tmp_path / "out")


def test_stats_ignore_stale_tables(raw, tmp_path):
    run_extract(raw, tmp_path, jobs=1)
    run_extract(raw, tmp_path, [Scenario.CYCLIST], jobs=1)
    stats = (tmp_path / "stats.csv").read_text().splitlines()
    assert [l.split(",")[0] for l in stats] == ["Scenario", "Cyclist", "Sum"]


def test_event_rows_round_trip(tmp_path):
    k = TripKey(3, 4)
    evs = {
        Scenario.LANE_CHANGE: [ScenarioEvent(Scenario.LANE_CHANGE, k, 0, 43, 57, cross_time=50,
                                             change_direction=Direction.RIGHT, x_time1=43, x_time2=57)],
        Scenario.CUT_IN: [ScenarioEvent(Scenario.CUT_IN, k, 0, 50, 150, cut_tick=100)],
        Scenario.PEDESTRIAN: [ScenarioEvent(Scenario.PEDESTRIAN, k, 0, 1, 9, obstacle_id=21)],
        Scenario.FREE_FLOW: [ScenarioEvent(Scenario.FREE_FLOW, k, 0, 0, 99)],
    }
    for s, rows in evs.items():
        with open(tables.event_path(tmp_path, s), "w", newline="") as fh:
            fh.write(tables.header_line(tables.event_columns(s)))
            tables.write_rows(fh, (tables.event_row(e) for e in rows))
        assert tables.read_events(tmp_path, s) == rows
    assert tables.event_path(tmp_path, Scenario.LANE_CHANGE).read_text().splitlines() == [
        "Device,Trip,EventId,StartTime,EndTime,CrossTime,ChangeDirection,XTime1,XTime2",
        "3,4,0,43,57,50,Right,43,57",
    ]


def test_sequence_headers(raw, tmp_path):
    run_extract(raw, tmp_path, jobs=1)
    head = tables.sequence_path(tmp_path, Scenario.PEDESTRIAN).read_text().splitlines()[0]
    assert head == ("Device,Trip,EventId,Time,ObstacleId,TargetType,Range,Transversal,RangeRate,"
                    "Latitude,Longitude,Heading,Speed,TargetLatitude,TargetLongitude,GpsValid")
