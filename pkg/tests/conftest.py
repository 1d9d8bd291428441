import os

import hypothesis
import pytest

from scenariomine.model import (
    FrontTargetSample,
    LaneSample,
    TripBundle,
    TripKey,
    TripSummaryRow,
    WsuSample,
)

hypothesis.settings.register_profile("ci", max_examples=60, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=500, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

KEY = TripKey(1, 0)


def wsu(t, lat=42.28, lon=-83.74, heading=90.0, speed=12.0, key=KEY):
    return WsuSample(key.device, key.trip, t, lat, lon, heading, speed)


def target(t, obstacle, cipv=0, ttype=1, d=20.0, l=0.0, rr=0.0, key=KEY):
    return FrontTargetSample(key.device, key.trip, t, obstacle, ttype, cipv, d, l, rr)


def lane(t, left, right, ql=2, qr=2, key=KEY):
    return LaneSample(key.device, key.trip, t, left, right, ql, qr)


def bundle(wsu_rows=(), fts=(), lanes=(), summary=None, key=KEY):
    """Sorted bundle from loose rows, the way ingest would hand it over."""
    return TripBundle(
        key=key,
        wsu=tuple(sorted(wsu_rows, key=lambda r: r.time)),
        front_targets=tuple(sorted(fts, key=lambda r: (r.time, r.obstacle_id))),
        lanes=tuple(sorted(lanes, key=lambda r: r.time)),
        summary=summary,
    )


def summary_row(start, end, key=KEY):
    return TripSummaryRow(key.device, key.trip, start, end, 1000.0, 3, 400.0)


def left_change_trace(n=100, ql=2, qr=2):
    """Left boundary drifts -1.8 -> -0.1 over 0..49 then jumps to -3.4 at 50;
    right boundary drifts 1.7 -> 3.4 over 0..51 then jumps to 0.1 at 52."""
    rows = []
    for t in range(n):
        left = -1.8 + 1.7 * t / 49 if t <= 49 else -3.4 + 0.02 * (t - 50)
        right = 1.7 + 1.7 * t / 51 if t <= 51 else 0.1 + 0.02 * (t - 52)
        q_l = ql(t) if callable(ql) else ql
        q_r = qr(t) if callable(qr) else qr
        rows.append(lane(t, round(left, 6), round(right, 6), q_l, q_r))
    return rows


TABLE_COUNTS = {
    "freeflow": 440001, "pedestrian": 26412, "cyclist": 1270,
    "carfollowing": 104849, "lanechange": 10873, "cutin": 72886,
}


def write_count_fixture(directory, counts=TABLE_COUNTS, trips=97):
    """Event tables with exactly ``counts[slug]`` distinct (Device, Trip, EventId)."""
    from scenariomine import tables
    from scenariomine.model import Scenario

    directory.mkdir(parents=True, exist_ok=True)
    for slug, n in counts.items():
        s = Scenario.from_slug(slug)
        cols = tables.event_columns(s)
        with open(tables.event_path(directory, s), "w", encoding="utf-8") as fh:
            fh.write(",".join(cols) + "\n")
            pad = "," * (len(cols) - 5)
            for i in range(n):
                trip, eid = i % trips, i // trips
                fh.write(f"1,{trip},{eid},{eid * 10},{eid * 10 + 5}{pad}\n")
    return directory


# --- acceptance reporting ------------------------------------------------------

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        details = [v for k, v in item.user_properties if k == "detail"]
        _CRITERIA[mark.args[0]] = (mark.args[1], rep.outcome, details)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, outcome, details = _CRITERIA[n]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        tr.write_line(f"[{verdict}] C{n} {title}" + (f": {'; '.join(details)}" if details else ""))
