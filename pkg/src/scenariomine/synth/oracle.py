"""Brute-force per-tick labeling, independent of the extractors.

Deliberately naive: every tick of the trip span is visited, previous
observations are found by scanning backwards, and XTime sets are built by
enumerating every tick of their windows.  Nothing here is imported from
``scenariomine.extract``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..model import (
    CYCLIST_TYPE,
    PEDESTRIAN_TYPE,
    Direction,
    ExtractionConfig,
    Scenario,
    ScenarioEvent,
    TripBundle,
)


@dataclass
class OracleLabels:
    """Per-scenario tick -> event ids, plus the events those labels describe."""

    labels: dict = field(default_factory=lambda: {s: {} for s in Scenario})
    events: list = field(default_factory=list)

    def mark(self, s: Scenario, tick: int, event_id: int) -> None:
        self.labels[s].setdefault(tick, []).append(event_id)

    def membership(self) -> set:
        """{(scenario, event_id, tick)} for every labeled tick."""
        return {(s, e, t) for s, m in self.labels.items() for t, ids in m.items() for e in ids}


def _trip_range(b: TripBundle):
    ticks = [r.time for r in b.wsu] + [r.time for r in b.front_targets] + [r.time for r in b.lanes]
    if b.summary is not None:
        ticks += [b.summary.start_tick, b.summary.end_tick]
    if not ticks:
        return None
    return min(ticks), max(ticks)


def _lane_jump_ticks(b: TripBundle, side: str, cfg: ExtractionConfig) -> dict:
    """tick -> signed jump, comparing each usable sample with the nearest earlier usable one."""
    lanes = list(b.lanes)
    qname = "quality_left" if side == "L" else "quality_right"
    vname = "lane_dis_l" if side == "L" else "lane_dis_r"
    jumps = {}
    for i, s in enumerate(lanes):
        if not getattr(s, qname) > cfg.quality_min:
            continue
        j = i - 1
        while j >= 0 and not getattr(lanes[j], qname) > cfg.quality_min:
            j -= 1
        if j < 0:
            continue
        delta = getattr(s, vname) - getattr(lanes[j], vname)
        if cfg.lane_jump_min_m < abs(delta) < cfg.lane_jump_max_m:
            jumps[s.time] = delta
    return jumps


def _oracle_lane_changes(b: TripBundle, cfg: ExtractionConfig) -> list:
    at = {s.time: s for s in b.lanes}
    left = _lane_jump_ticks(b, "L", cfg)
    right = _lane_jump_ticks(b, "R", cfg)
    hw, q, w = cfg.half_width_m, cfg.quality_min, cfg.xtime_window_ticks
    found = []
    for t1 in sorted(left):
        d1 = left[t1]
        partners = [t2 for t2 in range(t1 - cfg.lane_pair_window_ticks, t1 + cfg.lane_pair_window_ticks + 1)
                    if t2 in right and (right[t2] > 0) == (d1 > 0)]
        if not partners:
            continue
        direction = Direction.RIGHT if d1 > 0 else Direction.LEFT
        first, last = [], []
        for t in range(t1 - w, t1 + 1):
            s = at.get(t)
            if s is None:
                continue
            if direction is Direction.LEFT and s.quality_left > q and s.lane_dis_l > -hw:
                first.append(t)
            if direction is Direction.RIGHT and s.quality_right > q and s.lane_dis_r < hw:
                first.append(t)
        for t in range(t1, t1 + w + 1):
            s = at.get(t)
            if s is None:
                continue
            if direction is Direction.LEFT and s.quality_right > q and s.lane_dis_r < hw:
                last.append(t)
            if direction is Direction.RIGHT and s.quality_left > q and s.lane_dis_l > -hw:
                last.append(t)
        if first and last:
            found.append((t1, direction, min(first), max(last)))
    kept = []
    for item in found:
        if all(item[0] - k[0] >= cfg.lane_dedup_ticks for k in kept):
            kept.append(item)
    return kept


def oracle_labels(b: TripBundle, cfg: ExtractionConfig | None = None) -> OracleLabels:
    cfg = cfg or ExtractionConfig()
    out = OracleLabels()
    bounds = _trip_range(b)
    if bounds is None:
        return out
    lo, hi = bounds
    key = b.key
    wsu_at = {r.time: r for r in b.wsu}
    ft_at: dict = {}
    for r in b.front_targets:
        ft_at.setdefault(r.time, []).append(r)
    lane_at = {r.time for r in b.lanes}

    # free flow
    eid = -1
    last_free = None
    start = None
    for t in range(lo, hi + 1):
        if t in wsu_at and t not in ft_at:
            if last_free is None or t - last_free > cfg.freeflow_gap_ticks:
                if start is not None:
                    out.events.append(ScenarioEvent(Scenario.FREE_FLOW, key, eid, start, last_free))
                eid += 1
                start = t
            out.mark(Scenario.FREE_FLOW, t, eid)
            last_free = t
    if start is not None:
        out.events.append(ScenarioEvent(Scenario.FREE_FLOW, key, eid, start, last_free))

    # lane change
    changes = _oracle_lane_changes(b, cfg)
    for i, (ct, d, x1, x2) in enumerate(changes):
        out.events.append(ScenarioEvent(Scenario.LANE_CHANGE, key, i, x1, x2, cross_time=ct,
                                        change_direction=d, x_time1=x1, x_time2=x2))
        for t in range(x1, x2 + 1):
            if t in lane_at:
                out.mark(Scenario.LANE_CHANGE, t, i)

    def changing(t):
        return any(x1 <= t <= x2 for _, _, x1, x2 in changes)

    # car-following
    eid = -1
    prev_obstacle = None
    start = None
    for t in range(lo, hi + 1):
        in_path = [r.obstacle_id for r in ft_at.get(t, ()) if r.cipv == 1]
        obstacle = min(in_path) if in_path and not changing(t) else None
        if obstacle is not None:
            if obstacle != prev_obstacle:
                if start is not None:
                    out.events.append(ScenarioEvent(Scenario.CAR_FOLLOWING, key, eid, start, t_last))
                eid += 1
                start = t
            out.mark(Scenario.CAR_FOLLOWING, t, eid)
            t_last = t
        prev_obstacle = obstacle
    if start is not None:
        out.events.append(ScenarioEvent(Scenario.CAR_FOLLOWING, key, eid, start, t_last))

    # cut-in
    cuts = []
    for t in range(lo, hi + 1):
        for r in sorted(ft_at.get(t, ()), key=lambda r: r.obstacle_id):
            if r.cipv != 1 or changing(t):
                continue
            prev = None
            # observations older than the gap tolerance cannot count, so stop there
            for u in range(t - 1, max(lo, t - cfg.cutin_gap_ticks) - 1, -1):
                hit = [p for p in ft_at.get(u, ()) if p.obstacle_id == r.obstacle_id]
                if hit:
                    prev = hit[0]
                    break
            recent = prev is not None
            if (recent and prev.cipv == 0) or (not recent and not cfg.cutin_require_same_obstacle):
                cuts.append(t)
    every_tick = set(wsu_at) | set(ft_at) | lane_at
    for i, c in enumerate(cuts):
        a, z = max(lo, c - cfg.cutin_window_ticks), min(hi, c + cfg.cutin_window_ticks)
        out.events.append(ScenarioEvent(Scenario.CUT_IN, key, i, a, z, cut_tick=c))
        for t in range(a, z + 1):
            if t in every_tick:
                out.mark(Scenario.CUT_IN, t, i)

    # pedestrians and cyclists, numbered as the rows are scanned
    for scen, ttype, min_rows in ((Scenario.PEDESTRIAN, PEDESTRIAN_TYPE, cfg.pedestrian_min_rows),
                                  (Scenario.CYCLIST, CYCLIST_TYPE, cfg.cyclist_min_rows)):
        pid = -1
        prev = None
        tagged = []
        for t in range(lo, hi + 1):
            for r in sorted(ft_at.get(t, ()), key=lambda r: r.obstacle_id):
                if r.target_type != ttype:
                    continue
                if prev is None or r.obstacle_id != prev.obstacle_id or r.time - prev.time > cfg.vru_gap_ticks:
                    pid += 1
                tagged.append((pid, r))
                prev = r
        count: dict = {}
        for p, _ in tagged:
            count[p] = count.get(p, 0) + 1
        survivors = sorted(p for p, n in count.items() if n >= min_rows)
        renumber = {p: i for i, p in enumerate(survivors)}
        rows_of: dict = {}
        for p, r in tagged:
            if p in renumber:
                out.mark(scen, r.time, renumber[p])
                rows_of.setdefault(renumber[p], []).append(r)
        for i in range(len(survivors)):
            rs = rows_of[i]
            out.events.append(ScenarioEvent(scen, key, i, rs[0].time, rs[-1].time, obstacle_id=rs[0].obstacle_id))
    return out
