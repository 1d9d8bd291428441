from hypothesis import given, settings

from scenariomine.extract import extract_all
from scenariomine.model import ExtractionConfig, Scenario
from scenariomine.synth.compare import compare
from scenariomine.synth.oracle import oracle_labels

from conftest import bundle, left_change_trace, wsu
from strategies import trip_bundles


def extracted(b, cfg):
    res = extract_all(b, cfg)
    events = [e for r in res.values() for e in r.events]
    members = {(s, row.event_id, row.time) for s, r in res.items() for row in r.sequence}
    return events, members


def test_oracle_flags_worked_trace():
    lab = oracle_labels(bundle([wsu(t) for t in range(100)], lanes=left_change_trace()))
    (ev,) = [e for e in lab.events if e.scenario is Scenario.LANE_CHANGE]
    assert ev.cross_time == 50


def test_oracle_free_flow_is_anti_join():
    from conftest import target
    b = bundle([wsu(t) for t in range(40)], [target(t, 1) for t in range(10, 20)])
    lab = oracle_labels(b)
    assert sorted(lab.labels[Scenario.FREE_FLOW]) == [t for t in range(40) if not 10 <= t < 20]


def _check(b, cfg):
    events, members = extracted(b, cfg)
    lab = oracle_labels(b, cfg)
    rep = compare(events, lab.events, "oracle")
    assert rep.ok, rep.text()
    assert members == lab.membership()


@given(trip_bundles())
@settings(max_examples=300, deadline=None)
def test_extract_equals_oracle(b):
    _check(b, ExtractionConfig())


@given(trip_bundles())
@settings(max_examples=100, deadline=None)
def test_extract_equals_oracle_loose_cut_in(b):
    _check(b, ExtractionConfig(cutin_require_same_obstacle=False, pedestrian_min_rows=2, lane_dedup_ticks=5))
