"""Scenario extractors over a single TripBundle.

Every extractor is a pure function of (bundle, config).  Lane changes are
found first because car-following and cut-in exclude the ticks between
XTime1 and XTime2 of each lane change.
"""
from __future__ import annotations

import logging
from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

from . import geo
from .model import (
    CYCLIST_TYPE,
    PEDESTRIAN_TYPE,
    Direction,
    ExtractionConfig,
    FrontTargetSample,
    LaneSample,
    Scenario,
    ScenarioEvent,
    SequenceRow,
    TripBundle,
    TripKey,
)

log = logging.getLogger(__name__)

_WSU_COLS = ("Latitude", "Longitude", "Heading", "Speed")
_LANE_COLS = ("LaneDisL", "LaneDisR", "QualityLeft", "QualityRight")
_FT_COLS = ("ObstacleId", "TargetType", "CIPV", "Range", "Transversal", "RangeRate")

SEQUENCE_COLUMNS = {
    Scenario.FREE_FLOW: _WSU_COLS,
    Scenario.CAR_FOLLOWING: _FT_COLS + _WSU_COLS,
    Scenario.CUT_IN: _WSU_COLS + _LANE_COLS + _FT_COLS,
    Scenario.LANE_CHANGE: _LANE_COLS + _WSU_COLS,
    Scenario.PEDESTRIAN: ("ObstacleId", "TargetType", "Range", "Transversal", "RangeRate")
    + _WSU_COLS
    + ("TargetLatitude", "TargetLongitude", "GpsValid"),
}
SEQUENCE_COLUMNS[Scenario.CYCLIST] = SEQUENCE_COLUMNS[Scenario.PEDESTRIAN]

_NO_WSU = ("", "", "", "")
_NO_LANE = ("", "", "", "")
_NO_FT = ("", "", "", "", "", "")


@dataclass
class ExtractResult:
    events: list = field(default_factory=list)
    sequence: list = field(default_factory=list)
    counters: Counter = field(default_factory=Counter)


class LaneCandidate(NamedTuple):
    t1: int
    t2: int
    direction: Direction
    jump_left: float
    jump_right: float


@dataclass(frozen=True)
class NoChangeSegment:
    key: TripKey
    start_tick: int
    end_tick: int


@dataclass(frozen=True)
class CipvTimeline:
    """The closest-in-path obstacle per tick.

    When several rows claim cipv=1 at one tick the lowest obstacle id wins
    and the tick is counted in ``conflicts``.
    """

    key: TripKey
    rows: tuple  # one FrontTargetSample per tick, strictly increasing ticks
    conflicts: int = 0

    @classmethod
    def from_bundle(cls, bundle: TripBundle) -> "CipvTimeline":
        rows = []
        conflicts = 0
        last_t = None
        for r in bundle.front_targets:
            if r.cipv != 1:
                continue
            if r.time == last_t:
                conflicts += 1
                continue
            rows.append(r)
            last_t = r.time
        return cls(bundle.key, tuple(rows), conflicts)

    @property
    def ticks(self) -> list[int]:
        return [r.time for r in self.rows]


def segment_runs(ticks: Sequence[int], max_gap: int) -> list[tuple[int, int]]:
    runs = []
    start = prev = None
    for t in ticks:
        if start is None:
            start = prev = t
        elif t - prev <= max_gap:
            prev = t
        else:
            runs.append((start, prev))
            start = prev = t
    if start is not None:
        runs.append((start, prev))
    return runs


def _wsu_index(bundle: TripBundle) -> dict:
    return {w.time: w for w in bundle.wsu}


def _wsu_values(w) -> tuple:
    if w is None:
        return _NO_WSU
    return (w.latitude, w.longitude, w.heading, w.speed)


# --- free flow -------------------------------------------------------------

def extract_free_flow(bundle: TripBundle, cfg: ExtractionConfig) -> ExtractResult:
    occupied = {r.time for r in bundle.front_targets}
    free = [w for w in bundle.wsu if w.time not in occupied]
    res = ExtractResult()
    runs = segment_runs([w.time for w in free], cfg.freeflow_gap_ticks)
    key = bundle.key
    d, tr = key
    i = 0
    seq = res.sequence
    for eid, (lo, hi) in enumerate(runs):
        res.events.append(ScenarioEvent(Scenario.FREE_FLOW, key, eid, lo, hi))
        while i < len(free) and free[i].time <= hi:
            w = free[i]
            seq.append(SequenceRow(Scenario.FREE_FLOW, d, tr, eid, w.time,
                                   (w.latitude, w.longitude, w.heading, w.speed)))
            i += 1
    return res


# --- lane change -----------------------------------------------------------

def _lane_jumps(lanes: Iterable[LaneSample], left: bool, cfg: ExtractionConfig) -> list[tuple[int, float]]:
    """(tick, delta) wherever a lane distance moves by (min, max) meters between
    consecutive samples of usable quality on that side."""
    out = []
    prev = None
    qmin = cfg.quality_min
    lo, hi = cfg.lane_jump_min_m, cfg.lane_jump_max_m
    for s in lanes:
        if left:
            q, v = s.quality_left, s.lane_dis_l
        else:
            q, v = s.quality_right, s.lane_dis_r
        if q <= qmin:
            continue
        if prev is not None:
            delta = v - prev
            if lo < abs(delta) < hi:
                out.append((s.time, delta))
        prev = v
    return out


def detect_two_wheel_change(lanes: Sequence[LaneSample], cfg: ExtractionConfig) -> list[LaneCandidate]:
    left = _lane_jumps(lanes, True, cfg)
    right = _lane_jumps(lanes, False, cfg)
    right_t = [t for t, _ in right]
    w = cfg.lane_pair_window_ticks
    out = []
    for t1, d1 in left:
        best = None
        for j in range(bisect_left(right_t, t1 - w), bisect_right(right_t, t1 + w)):
            t2, d2 = right[j]
            if (d1 < 0) != (d2 < 0):
                continue
            if best is None or abs(t2 - t1) < abs(best[0] - t1):
                best = (t2, d2)
        if best is not None:
            direction = Direction.LEFT if d1 < 0 else Direction.RIGHT
            out.append(LaneCandidate(t1, best[0], direction, d1, best[1]))
    return out


def compute_wheel_exist_time(
    lanes: Sequence[LaneSample],
    cross_time: int,
    direction: Direction,
    cfg: ExtractionConfig,
    times: Optional[Sequence[int]] = None,
) -> Optional[tuple[int, int]]:
    """(XTime1, XTime2) around ``cross_time``, or None when either set is empty."""
    if times is None:
        times = [s.time for s in lanes]
    w = cfg.xtime_window_ticks
    hw = cfg.half_width_m
    q = cfg.quality_min
    before = lanes[bisect_left(times, cross_time - w):bisect_right(times, cross_time)]
    after = lanes[bisect_left(times, cross_time):bisect_right(times, cross_time + w)]
    if direction is Direction.LEFT:
        x1 = [s.time for s in before if s.quality_left > q and s.lane_dis_l + hw > 0]
        x2 = [s.time for s in after if s.quality_right > q and s.lane_dis_r - hw < 0]
    else:
        x1 = [s.time for s in before if s.quality_right > q and s.lane_dis_r - hw < 0]
        x2 = [s.time for s in after if s.quality_left > q and s.lane_dis_l + hw > 0]
    if not x1 or not x2:
        return None
    return min(x1), max(x2)


def lane_change_events(bundle: TripBundle, cfg: ExtractionConfig, counters: Optional[Counter] = None) -> list[ScenarioEvent]:
    counters = counters if counters is not None else Counter()
    lanes = bundle.lanes
    if not lanes:
        return []
    times = [s.time for s in lanes]
    resolved = []
    for c in detect_two_wheel_change(lanes, cfg):
        counters["lane_candidates"] += 1
        xt = compute_wheel_exist_time(lanes, c.t1, c.direction, cfg, times)
        if xt is None:
            counters["lane_unresolved"] += 1
            continue
        resolved.append((c, xt))
    events = []
    last_kept = None
    for c, (x1, x2) in resolved:
        # candidates are in cross-time order; keep the earliest of each cluster
        if last_kept is not None and c.t1 - last_kept < cfg.lane_dedup_ticks:
            counters["lane_deduplicated"] += 1
            continue
        last_kept = c.t1
        events.append(ScenarioEvent(
            Scenario.LANE_CHANGE, bundle.key, len(events), x1, x2,
            cross_time=c.t1, change_direction=c.direction, x_time1=x1, x_time2=x2,
        ))
    return events


def extract_lane_change(bundle: TripBundle, cfg: ExtractionConfig, events=None) -> ExtractResult:
    res = ExtractResult()
    res.events = events if events is not None else lane_change_events(bundle, cfg, res.counters)
    if not res.events:
        return res
    wsu = _wsu_index(bundle)
    times = [s.time for s in bundle.lanes]
    d, tr = bundle.key
    for ev in res.events:
        for s in bundle.lanes[bisect_left(times, ev.start_tick):bisect_right(times, ev.end_tick)]:
            res.sequence.append(SequenceRow(
                Scenario.LANE_CHANGE, d, tr, ev.event_id, s.time,
                (s.lane_dis_l, s.lane_dis_r, s.quality_left, s.quality_right) + _wsu_values(wsu.get(s.time)),
            ))
    return res


# --- no-change segments, car-following, cut-in -----------------------------

def build_no_change_segments(bundle: TripBundle, lane_change_events: Iterable[ScenarioEvent]) -> list[NoChangeSegment]:
    span = bundle.span()
    if span is None:
        return []
    lo, hi = span
    cuts = sorted((e.x_time1, e.x_time2) for e in lane_change_events)
    out = []
    cursor = lo
    for a, b in cuts:
        if a > cursor:
            out.append(NoChangeSegment(bundle.key, cursor, min(a - 1, hi)))
        cursor = max(cursor, b + 1)
        if cursor > hi:
            break
    if cursor <= hi:
        out.append(NoChangeSegment(bundle.key, cursor, hi))
    return out


class _SegmentLookup:
    def __init__(self, segments: Sequence[NoChangeSegment]):
        self.starts = [s.start_tick for s in segments]
        self.ends = [s.end_tick for s in segments]

    def __call__(self, t: int) -> int:
        """Index of the segment containing tick t, or -1."""
        i = bisect_right(self.starts, t) - 1
        if i >= 0 and t <= self.ends[i]:
            return i
        return -1


def extract_car_following(bundle: TripBundle, segments: Sequence[NoChangeSegment], cfg: ExtractionConfig,
                          timeline: Optional[CipvTimeline] = None) -> ExtractResult:
    res = ExtractResult()
    timeline = timeline or CipvTimeline.from_bundle(bundle)
    res.counters["cipv_conflicts"] = timeline.conflicts
    seg_of = _SegmentLookup(segments)
    runs: list[list[FrontTargetSample]] = []
    cur = None
    cur_seg = -1
    for r in timeline.rows:
        s = seg_of(r.time)
        if s < 0:
            cur = None
            continue
        if cur is not None and r.time == cur[-1].time + 1 and r.obstacle_id == cur[-1].obstacle_id and s == cur_seg:
            cur.append(r)
        else:
            cur = [r]
            cur_seg = s
            runs.append(cur)
    if not runs:
        return res
    wsu = _wsu_index(bundle)
    key = bundle.key
    d, tr = key
    for eid, run in enumerate(runs):
        res.events.append(ScenarioEvent(Scenario.CAR_FOLLOWING, key, eid, run[0].time, run[-1].time))
        for r in run:
            res.sequence.append(SequenceRow(
                Scenario.CAR_FOLLOWING, d, tr, eid, r.time,
                (r.obstacle_id, r.target_type, r.cipv, r.range_d, r.lateral_l, r.range_rate)
                + _wsu_values(wsu.get(r.time)),
            ))
    return res


def cut_in_ticks(bundle: TripBundle, segments: Sequence[NoChangeSegment], cfg: ExtractionConfig) -> list[tuple[int, int]]:
    """(cut tick, obstacle id) for every 0 -> 1 CIPV transition outside lane changes."""
    seg_of = _SegmentLookup(segments)
    gap = cfg.cutin_gap_ticks
    last: dict[int, tuple[int, int]] = {}
    out = []
    for r in bundle.front_targets:
        prev = last.get(r.obstacle_id)
        last[r.obstacle_id] = (r.time, r.cipv)
        if r.cipv != 1:
            continue
        if prev is not None and r.time - prev[0] <= gap:
            hit = prev[1] == 0
        else:
            # a track first seen (or re-acquired) already in path
            hit = not cfg.cutin_require_same_obstacle
        if hit and seg_of(r.time) >= 0:
            out.append((r.time, r.obstacle_id))
    return out


def extract_cut_in(bundle: TripBundle, segments: Sequence[NoChangeSegment], cfg: ExtractionConfig) -> ExtractResult:
    res = ExtractResult()
    cuts = cut_in_ticks(bundle, segments, cfg)
    if not cuts:
        return res
    span_lo, span_hi = bundle.span()
    w = cfg.cutin_window_ticks
    wsu = _wsu_index(bundle)
    lanes = {s.time: s for s in bundle.lanes}
    fts = {(r.time, r.obstacle_id): r for r in bundle.front_targets}
    wsu_t = [s.time for s in bundle.wsu]
    lane_t = [s.time for s in bundle.lanes]
    ft_t = [r.time for r in bundle.front_targets]
    key = bundle.key
    d, tr = key
    for eid, (c, obstacle) in enumerate(cuts):
        lo, hi = max(c - w, span_lo), min(c + w, span_hi)
        res.events.append(ScenarioEvent(Scenario.CUT_IN, key, eid, lo, hi, cut_tick=c))
        ticks = set()
        for ts in (wsu_t, lane_t, ft_t):
            ticks.update(ts[bisect_left(ts, lo):bisect_right(ts, hi)])
        for t in sorted(ticks):
            ln = lanes.get(t)
            ft = fts.get((t, obstacle))
            res.sequence.append(SequenceRow(
                Scenario.CUT_IN, d, tr, eid, t,
                _wsu_values(wsu.get(t))
                + ((ln.lane_dis_l, ln.lane_dis_r, ln.quality_left, ln.quality_right) if ln else _NO_LANE)
                + ((ft.obstacle_id, ft.target_type, ft.cipv, ft.range_d, ft.lateral_l, ft.range_rate) if ft else _NO_FT),
            ))
    return res


# --- vulnerable road users -------------------------------------------------

def vru_groups(bundle: TripBundle, target_type: int, min_rows: int, gap: int) -> tuple[list[list[FrontTargetSample]], int]:
    """Scan matching rows in time order; a new group starts whenever the obstacle
    id changes or the same id reappears after more than ``gap`` ticks.
    Groups shorter than ``min_rows`` are dropped; returns (kept, dropped count)."""
    groups: list[list[FrontTargetSample]] = []
    cur = None
    for r in bundle.front_targets:
        if r.target_type != target_type:
            continue
        if cur is not None and r.obstacle_id == cur[-1].obstacle_id and r.time - cur[-1].time <= gap:
            cur.append(r)
        else:
            cur = [r]
            groups.append(cur)
    kept = [g for g in groups if len(g) >= min_rows]
    return kept, len(groups) - len(kept)


def extract_vru(bundle: TripBundle, target_type: int, min_rows: int, cfg: Optional[ExtractionConfig] = None) -> ExtractResult:
    cfg = cfg or ExtractionConfig()
    scenario = Scenario.CYCLIST if target_type == CYCLIST_TYPE else Scenario.PEDESTRIAN
    res = ExtractResult()
    groups, dropped = vru_groups(bundle, target_type, min_rows, cfg.vru_gap_ticks)
    res.counters["vru_deleted"] = dropped
    if not groups:
        return res
    wsu = _wsu_index(bundle)
    key = bundle.key
    d, tr = key
    for eid, g in enumerate(groups):
        res.events.append(ScenarioEvent(scenario, key, eid, g[0].time, g[-1].time, obstacle_id=g[0].obstacle_id))
        for r in g:
            w = wsu.get(r.time)
            target = ("", "")
            ok = 0
            if w is not None:
                try:
                    p = geo.vehicle_frame_to_global(geo.GeoPoint(w.latitude, w.longitude), w.heading, r.range_d, r.lateral_l)
                    target, ok = (p.latitude, p.longitude), 1
                except geo.GeoError:
                    pass
            if not ok:
                res.counters["vru_gps_missing"] += 1
            res.sequence.append(SequenceRow(
                scenario, d, tr, eid, r.time,
                (r.obstacle_id, r.target_type, r.range_d, r.lateral_l, r.range_rate) + _wsu_values(w) + target + (ok,),
            ))
    return res


def extract_pedestrian(bundle: TripBundle, cfg: ExtractionConfig) -> ExtractResult:
    return extract_vru(bundle, PEDESTRIAN_TYPE, cfg.pedestrian_min_rows, cfg)


def extract_cyclist(bundle: TripBundle, cfg: ExtractionConfig) -> ExtractResult:
    return extract_vru(bundle, CYCLIST_TYPE, cfg.cyclist_min_rows, cfg)


ALL_SCENARIOS = tuple(Scenario)


def extract_all(bundle: TripBundle, cfg: ExtractionConfig, scenarios: Iterable[Scenario] = ALL_SCENARIOS) -> dict[Scenario, ExtractResult]:
    """Run the selected extractors on one bundle, in scenario enum order."""
    wanted = set(scenarios)
    out: dict[Scenario, ExtractResult] = {}
    lane_events = None
    segments = None
    if wanted & {Scenario.LANE_CHANGE, Scenario.CAR_FOLLOWING, Scenario.CUT_IN}:
        counters: Counter = Counter()
        lane_events = lane_change_events(bundle, cfg, counters)
        segments = build_no_change_segments(bundle, lane_events)
        if Scenario.LANE_CHANGE in wanted:
            out[Scenario.LANE_CHANGE] = extract_lane_change(bundle, cfg, lane_events)
            out[Scenario.LANE_CHANGE].counters.update(counters)
    if Scenario.FREE_FLOW in wanted:
        out[Scenario.FREE_FLOW] = extract_free_flow(bundle, cfg)
    if Scenario.CAR_FOLLOWING in wanted:
        out[Scenario.CAR_FOLLOWING] = extract_car_following(bundle, segments, cfg)
    if Scenario.CUT_IN in wanted:
        out[Scenario.CUT_IN] = extract_cut_in(bundle, segments, cfg)
    if Scenario.PEDESTRIAN in wanted:
        out[Scenario.PEDESTRIAN] = extract_pedestrian(bundle, cfg)
    if Scenario.CYCLIST in wanted:
        out[Scenario.CYCLIST] = extract_cyclist(bundle, cfg)
    return {s: out[s] for s in ALL_SCENARIOS if s in out}
