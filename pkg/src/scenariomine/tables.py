"""CSV layouts of the per-scenario Event and Sequence tables, and stats."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Iterator

from .extract import SEQUENCE_COLUMNS
from .model import STATS_ORDER, Direction, Scenario, ScenarioEvent, TripKey

BASE_EVENT_COLUMNS = ("Device", "Trip", "EventId", "StartTime", "EndTime")
EXTRA_EVENT_COLUMNS = {
    Scenario.FREE_FLOW: (),
    Scenario.CAR_FOLLOWING: (),
    Scenario.CUT_IN: ("CutTime",),
    Scenario.LANE_CHANGE: ("CrossTime", "ChangeDirection", "XTime1", "XTime2"),
    Scenario.PEDESTRIAN: ("ObstacleId",),
    Scenario.CYCLIST: ("ObstacleId",),
}
BASE_SEQUENCE_COLUMNS = ("Device", "Trip", "EventId", "Time")


def event_columns(s: Scenario) -> tuple:
    return BASE_EVENT_COLUMNS + EXTRA_EVENT_COLUMNS[s]


def sequence_columns(s: Scenario) -> tuple:
    return BASE_SEQUENCE_COLUMNS + SEQUENCE_COLUMNS[s]


def event_path(directory, s: Scenario) -> Path:
    return Path(directory) / f"{s.slug}_event.csv"


def sequence_path(directory, s: Scenario) -> Path:
    return Path(directory) / f"{s.slug}_sequence.csv"


def event_row(ev: ScenarioEvent) -> tuple:
    base = (ev.key.device, ev.key.trip, ev.event_id, ev.start_tick, ev.end_tick)
    s = ev.scenario
    if s is Scenario.CUT_IN:
        return base + (ev.cut_tick,)
    if s is Scenario.LANE_CHANGE:
        return base + (ev.cross_time, ev.change_direction.value, ev.x_time1, ev.x_time2)
    if s in (Scenario.PEDESTRIAN, Scenario.CYCLIST):
        return base + (ev.obstacle_id,)
    return base


def sequence_row(r) -> tuple:
    return (r.device, r.trip, r.event_id, r.time) + r.values


def write_rows(fh, rows: Iterable[tuple]) -> None:
    csv.writer(fh, lineterminator="\n").writerows(rows)


def header_line(cols) -> str:
    return ",".join(cols) + "\n"


def event_from_row(s: Scenario, row: dict) -> ScenarioEvent:
    def opt(name):
        v = row.get(name, "")
        return int(v) if v not in ("", None) else None

    kw = {}
    if s is Scenario.CUT_IN:
        kw["cut_tick"] = opt("CutTime")
    elif s is Scenario.LANE_CHANGE:
        kw.update(
            cross_time=opt("CrossTime"),
            change_direction=Direction(row["ChangeDirection"]),
            x_time1=opt("XTime1"),
            x_time2=opt("XTime2"),
        )
    elif s in (Scenario.PEDESTRIAN, Scenario.CYCLIST):
        kw["obstacle_id"] = opt("ObstacleId")
    return ScenarioEvent(
        s, TripKey(int(row["Device"]), int(row["Trip"])), int(row["EventId"]),
        int(row["StartTime"]), int(row["EndTime"]), **kw,
    )


def read_events(directory, s: Scenario) -> list[ScenarioEvent]:
    p = event_path(directory, s)
    if not p.exists():
        return []
    with open(p, newline="", encoding="utf-8") as fh:
        return [event_from_row(s, row) for row in csv.DictReader(fh)]


def read_all_events(directory, scenarios: Iterable[Scenario] = tuple(Scenario)) -> list[ScenarioEvent]:
    out = []
    for s in scenarios:
        out.extend(read_events(directory, s))
    return out


def iter_sequence(directory, s: Scenario) -> Iterator[dict]:
    p = sequence_path(directory, s)
    if not p.exists():
        return
    with open(p, newline="", encoding="utf-8") as fh:
        yield from csv.DictReader(fh)


def count_events(path) -> int:
    """Distinct (Device, Trip, EventId) rows in an event CSV."""
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None:
            return 0
        i, j, k = header.index("Device"), header.index("Trip"), header.index("EventId")
        for row in r:
            if row:
                seen.add((row[i], row[j], row[k]))
    return len(seen)


def scenario_counts(directory, scenarios: Iterable[Scenario] | None = None) -> list[tuple[str, int]]:
    """(Scenario, TotalEvents) for each event file present, in summary-table order."""
    wanted = set(scenarios) if scenarios is not None else set(Scenario)
    out = []
    for s in STATS_ORDER:
        p = event_path(directory, s)
        if s in wanted and p.exists():
            out.append((s.title, count_events(p)))
    return out


def write_stats(directory, counts: list[tuple[str, int]]) -> Path:
    p = Path(directory) / "stats.csv"
    with open(p, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("Scenario", "TotalEvents"))
        w.writerows(counts)
        w.writerow(("Sum", sum(n for _, n in counts)))
    return p
