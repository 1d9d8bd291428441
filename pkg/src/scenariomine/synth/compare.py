"""Matching extracted events against expected ones, and directory verification."""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .. import tables
from ..ingest import read_bundles
from ..model import ExtractionConfig, Scenario, ScenarioEvent
from .generate import read_truth
from .oracle import oracle_labels

_FIELDS = ("event_id", "start_tick", "end_tick", "cross_time", "change_direction",
           "x_time1", "x_time2", "cut_tick", "obstacle_id")


def _fmt(v):
    if v is None:
        return ""
    return getattr(v, "value", v)


@dataclass
class CompareReport:
    label: str = "truth"
    matched: list = field(default_factory=list)
    missed: list = field(default_factory=list)
    spurious: list = field(default_factory=list)
    mismatches: list = field(default_factory=list)  # (expected, actual, [field names])
    sequence_diffs: list = field(default_factory=list)  # (kind, scenario, key, event_id, tick)

    @property
    def ok(self) -> bool:
        return not (self.missed or self.spurious or self.mismatches or self.sequence_diffs)

    def summary(self) -> str:
        return (f"{self.label}: matched={len(self.matched)} missed={len(self.missed)} "
                f"spurious={len(self.spurious)} field_mismatches={len(self.mismatches)} "
                f"sequence_diffs={len(self.sequence_diffs)}")

    def rows(self) -> list[tuple]:
        """Kind,Scenario,Device,Trip,EventId,Field,Expected,Actual"""
        out = []
        for e in self.missed:
            out.append(("missed", e.scenario.slug, e.key.device, e.key.trip, e.event_id, "", "", ""))
        for e in self.spurious:
            out.append(("spurious", e.scenario.slug, e.key.device, e.key.trip, e.event_id, "", "", ""))
        for exp, act, names in self.mismatches:
            for n in names:
                out.append(("mismatch", exp.scenario.slug, exp.key.device, exp.key.trip, exp.event_id,
                            n, _fmt(getattr(exp, n)), _fmt(getattr(act, n))))
        for kind, s, key, eid, t in self.sequence_diffs:
            out.append((kind, s.slug, key.device, key.trip, eid, "Time", t if kind == "sequence_missing" else "",
                        t if kind == "sequence_spurious" else ""))
        return out

    def text(self, limit: int = 20) -> str:
        lines = [self.summary()]
        for r in self.rows()[:limit]:
            lines.append("  " + " ".join(str(x) for x in r))
        if len(self.rows()) > limit:
            lines.append(f"  ... {len(self.rows()) - limit} more")
        return "\n".join(lines)


def _diff_fields(a: ScenarioEvent, b: ScenarioEvent) -> list[str]:
    return [f for f in _FIELDS if getattr(a, f) != getattr(b, f)]


def _overlap(a: ScenarioEvent, b: ScenarioEvent) -> int:
    return min(a.end_tick, b.end_tick) - max(a.start_tick, b.start_tick) + 1


def compare(extracted: Iterable[ScenarioEvent], truth: Iterable[ScenarioEvent], label: str = "truth") -> CompareReport:
    """Pair events per (scenario, trip): identical (start, end) first, then by
    largest interval overlap.  Paired events with differing fields are
    mismatches; unpaired expected events are missed, unpaired extracted
    ones spurious."""
    rep = CompareReport(label)
    groups: dict = defaultdict(lambda: ([], []))
    for e in truth:
        groups[(e.scenario, e.key)][0].append(e)
    for e in extracted:
        groups[(e.scenario, e.key)][1].append(e)
    for gk in sorted(groups, key=lambda k: (list(Scenario).index(k[0]), k[1])):
        exp, act = groups[gk]
        exp = sorted(exp, key=lambda e: (e.start_tick, e.end_tick, e.event_id))
        act = sorted(act, key=lambda e: (e.start_tick, e.end_tick, e.event_id))
        free = list(act)
        pairs = []
        unpaired = []
        by_span = defaultdict(list)
        for a in free:
            by_span[(a.start_tick, a.end_tick)].append(a)
        for e in exp:
            bucket = by_span.get((e.start_tick, e.end_tick))
            if bucket:
                a = bucket.pop(0)
                free.remove(a)
                pairs.append((e, a))
            else:
                unpaired.append(e)
        for e in unpaired:
            best = max(free, key=lambda a: (_overlap(e, a), -abs(a.start_tick - e.start_tick)), default=None)
            if best is not None and _overlap(e, best) > 0:
                free.remove(best)
                pairs.append((e, best))
            else:
                rep.missed.append(e)
        rep.spurious.extend(free)
        for e, a in pairs:
            d = _diff_fields(e, a)
            if d:
                rep.mismatches.append((e, a, d))
            else:
                rep.matched.append((e, a))
    return rep


def write_report_csv(path, reports: Iterable[CompareReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("Check", "Kind", "Scenario", "Device", "Trip", "EventId", "Field", "Expected", "Actual"))
        for rep in reports:
            for r in rep.rows():
                w.writerow((rep.label,) + r)


def sequence_membership(events_dir, scenarios: Iterable[Scenario]) -> set:
    out = set()
    for s in scenarios:
        for row in tables.iter_sequence(events_dir, s):
            out.add((s, (int(row["Device"]), int(row["Trip"])), int(row["EventId"]), int(row["Time"])))
    return out


def verify_directory(input_dir, events_dir, cfg: Optional[ExtractionConfig] = None,
                     scenarios: Iterable[Scenario] = tuple(Scenario)) -> list[CompareReport]:
    """Check extracted tables against ground_truth.csv (when present) and the oracle."""
    cfg = cfg or ExtractionConfig()
    scenarios = [s for s in scenarios if tables.event_path(events_dir, s).exists()]
    if not scenarios:
        raise FileNotFoundError(f"no event tables found in {events_dir}")
    extracted = tables.read_all_events(events_dir, scenarios)
    reports = []
    truth_path = Path(input_dir) / "ground_truth.csv"
    if truth_path.exists():
        truth = [e for e in read_truth(truth_path) if e.scenario in scenarios]
        reports.append(compare(extracted, truth, "truth"))

    oracle_events = []
    oracle_members = set()
    for b in read_bundles(input_dir):
        lab = oracle_labels(b, cfg)
        oracle_events += [e for e in lab.events if e.scenario in scenarios]
        oracle_members |= {(s, tuple(b.key), e, t) for s, e, t in lab.membership() if s in scenarios}
    rep = compare(extracted, oracle_events, "oracle")
    got = sequence_membership(events_dir, scenarios)
    for s, key, eid, t in sorted(oracle_members - got, key=lambda x: (x[0].value, x[1:])):
        rep.sequence_diffs.append(("sequence_missing", s, _key(key), eid, t))
    for s, key, eid, t in sorted(got - oracle_members, key=lambda x: (x[0].value, x[1:])):
        rep.sequence_diffs.append(("sequence_spurious", s, _key(key), eid, t))
    reports.append(rep)
    return reports


def _key(k):
    from ..model import TripKey
    return TripKey(*k)
