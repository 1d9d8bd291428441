import dataclasses

from scenariomine.model import Scenario, ScenarioEvent, TripKey
from scenariomine.synth.compare import compare, write_report_csv

K = TripKey(1, 0)


def planted(n=5):
    return [ScenarioEvent(Scenario.CAR_FOLLOWING, K, i, 100 * i, 100 * i + 40) for i in range(n)]


def test_identical_sets_all_matched():
    rep = compare(planted(), planted())
    assert rep.ok and len(rep.matched) == 5


def test_boundary_off_by_one_is_field_mismatch():
    got = planted()
    got[2] = dataclasses.replace(got[2], end_tick=got[2].end_tick + 1)
    rep = compare(got, planted())
    assert not rep.ok
    assert (len(rep.missed), len(rep.spurious), len(rep.mismatches)) == (0, 0, 1)
    exp, act, fields = rep.mismatches[0]
    assert fields == ["end_tick"] and exp.event_id == 2


def test_empty_extraction_all_missed():
    rep = compare([], planted())
    assert len(rep.missed) == 5 and not rep.spurious


def test_extra_event_is_spurious():
    extra = ScenarioEvent(Scenario.CAR_FOLLOWING, K, 5, 900, 950)
    rep = compare(planted() + [extra], planted())
    assert rep.spurious == [extra]


def test_groups_by_scenario_and_trip():
    other_trip = [dataclasses.replace(e, key=TripKey(1, 1)) for e in planted()]
    rep = compare(other_trip, planted())
    assert len(rep.missed) == 5 and len(rep.spurious) == 5


def test_report_csv(tmp_path):
    got = planted()
    got[0] = dataclasses.replace(got[0], start_tick=1)
    rep = compare(got[:4], planted())
    write_report_csv(tmp_path / "r.csv", [rep])
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "Check,Kind,Scenario,Device,Trip,EventId,Field,Expected,Actual"
    assert "truth,missed,carfollowing,1,0,4,,," in lines
    assert "truth,mismatch,carfollowing,1,0,0,start_tick,0,1" in lines
