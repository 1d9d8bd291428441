"""Synthetic trips with planted, labeled scenario events.

A trip is a sequence of non-overlapping *slots* separated by empty road.
The slot layout (kinds, durations, lane-change shapes) is drawn from
``layout_seed`` only; ``seed`` drives measurement noise.  Ground truth is
computed from the layout, never by running a detector over the samples.

Lane-change traces are built so every sample inside the XTime windows is at
least ``_MARGIN`` meters from the wheel-on-line thresholds, which is more
than the maximum jitter.  The planted XTimes therefore survive any noise
draw exactly.
"""
from __future__ import annotations

import csv
import dataclasses
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

from ..geo import METERS_PER_DEG
from ..ingest import TableWriter
from ..model import (
    CYCLIST_TYPE,
    PEDESTRIAN_TYPE,
    Direction,
    FrontTargetSample,
    LaneSample,
    Scenario,
    ScenarioEvent,
    TableKind,
    TripBundle,
    TripKey,
    TripSummaryRow,
    WsuSample,
    coerce_fields,
    read_key_values,
)

LANE_WIDTH_M = 3.5
HALF_CAR_M = 0.91  # matches the default ExtractionConfig.half_width_m
MAX_JITTER_M = 0.05
MAX_DROPOUT = 0.05
_MARGIN = 0.06
_LC_HALF = 20  # lane-change slot spans cross tick +/- this many ticks
_CUTIN_WINDOW = 50
_VEHICLE_TYPES = (1, 2)


class InfeasibleSpec(ValueError):
    pass


@dataclass(frozen=True)
class TripSpec:
    length_ticks: int = 3000
    car_following: int = 3
    cut_in: int = 3
    lane_change: int = 2
    lane_change_with_lead: int = 1
    pedestrian: int = 2
    cyclist: int = 2
    decoys: int = 2
    lane_jitter_m: float = 0.03
    quality_dropout: float = 0.02
    seed: int = 0
    layout_seed: int = 0
    device: int = 1
    trip: int = 0
    trips: int = 1
    latitude: float = 42.28
    longitude: float = -83.74
    first_event_tick: int = -1  # >= 0 pins the first planted event (cut tick, cross time, or start)

    def __post_init__(self):
        counts = ("car_following", "cut_in", "lane_change", "lane_change_with_lead",
                  "pedestrian", "cyclist", "decoys")
        for name in counts:
            if getattr(self, name) < 0:
                raise InfeasibleSpec(f"{name} must be >= 0")
        if self.length_ticks <= 0 or self.trips <= 0:
            raise InfeasibleSpec("length_ticks and trips must be positive")
        if not 0 <= self.lane_jitter_m <= MAX_JITTER_M:
            raise InfeasibleSpec(f"lane_jitter_m must be in [0, {MAX_JITTER_M}]")
        if not 0 <= self.quality_dropout <= MAX_DROPOUT:
            raise InfeasibleSpec(f"quality_dropout must be in [0, {MAX_DROPOUT}]")
        if not abs(self.latitude) < 80:
            raise InfeasibleSpec("latitude must be within +/-80 degrees")

    @classmethod
    def from_file(cls, path) -> "TripSpec":
        return cls(**coerce_fields(cls, read_key_values(path)))

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in dataclasses.fields(self))

    def expand(self) -> list["TripSpec"]:
        """One single-trip spec per trip; trip ids and both seeds advance together."""
        return [
            dataclasses.replace(self, trip=self.trip + i, seed=self.seed + i,
                                layout_seed=self.layout_seed + i, trips=1)
            for i in range(self.trips)
        ]


@dataclass
class GroundTruth:
    key: TripKey
    events: list
    decoys: int = 0

    def by_scenario(self, s: Scenario) -> list:
        return [e for e in self.events if e.scenario is s]

    def label_map(self) -> dict:
        """scenario -> tick -> event ids whose [start, end] covers the tick."""
        out: dict = {s: {} for s in Scenario}
        for e in self.events:
            for t in range(e.start_tick, e.end_tick + 1):
                out[e.scenario].setdefault(t, []).append(e.event_id)
        return out


# --- layout ----------------------------------------------------------------

@dataclass
class _LaneChange:
    c: int  # first tick with the vehicle center past the boundary
    direction: Direction
    v: float  # lateral speed, m/tick
    phi: float
    delay: int  # lag of the late side's lane frame update

    @property
    def cross_time(self) -> int:
        return self.c if self.direction is Direction.LEFT else self.c + self.delay

    def distances(self, t: int) -> tuple[float, float]:
        """Noise-free (LaneDisL, LaneDisR) at tick t."""
        W = LANE_WIDTH_M
        if self.direction is Direction.LEFT:
            y = min(max(self.v * (t - self.c) + W / 2 + self.phi, 0.0), W)
            left = y - 1.5 * W if t >= self.c else y - W / 2
            right = y - W / 2 if t >= self.c + self.delay else y + W / 2
        else:
            y = max(min(-self.v * (t - self.c) - W / 2 - self.phi, 0.0), -W)
            right = y + 1.5 * W if t >= self.c else y + W / 2
            left = y + W / 2 if t >= self.c + self.delay else y - W / 2
        return left, right

    def x_times(self) -> Optional[tuple[int, int]]:
        ct = self.cross_time
        hw = HALF_CAR_M
        before = range(ct - 10, ct + 1)
        after = range(ct, ct + 11)
        if self.direction is Direction.LEFT:
            x1 = [t for t in before if self.distances(t)[0] + hw > 0]
            x2 = [t for t in after if self.distances(t)[1] - hw < 0]
        else:
            x1 = [t for t in before if self.distances(t)[1] - hw < 0]
            x2 = [t for t in after if self.distances(t)[0] + hw > 0]
        if not x1 or not x2:
            return None
        return min(x1), max(x2)

    def well_posed(self) -> bool:
        ct = self.cross_time
        for t in range(ct - 12, ct + 13):
            left, right = self.distances(t)
            if abs(left + HALF_CAR_M) < _MARGIN or abs(right - HALF_CAR_M) < _MARGIN:
                return False
        # exactly one jump per side, well inside the (2, 4) m gate even with jitter
        for side in (0, 1):
            vals = [self.distances(t)[side] for t in range(self.c - _LC_HALF, self.c + _LC_HALF + 1)]
            deltas = [abs(b - a) for a, b in zip(vals, vals[1:])]
            if sum(1 for x in deltas if 2.2 < x < 3.8) != 1 or sum(1 for x in deltas if x > 1.0) != 1:
                return False
        return self.x_times() is not None


def _plan_lane_change(rng: random.Random, c: int, direction: Direction) -> _LaneChange:
    for _ in range(1000):
        v = rng.uniform(0.12, 0.3)
        lc = _LaneChange(c, direction, v, rng.uniform(0.01, v - 0.01), rng.randint(0, 3))
        if lc.well_posed():
            return lc
    raise AssertionError("could not draw a well-posed lane change")


@dataclass
class _Slot:
    kind: str
    start: int
    length: int
    obstacle: int = 0
    target_type: int = 1
    pre: int = 0  # cut-in: ticks observed out of path before cutting in
    lane: Optional[_LaneChange] = None
    fields: dict = field(default_factory=dict)

    @property
    def end(self) -> int:
        return self.start + self.length - 1


def _slot_length(kind: str, rng: random.Random) -> dict:
    if kind == "cf":
        return {"length": rng.randint(15, 80)}
    if kind == "cut":
        pre = rng.randint(3, 12)
        return {"length": pre + rng.randint(10, 60), "pre": pre}
    if kind in ("lc", "lcl"):
        return {"length": 2 * _LC_HALF + 1}
    if kind == "ped":
        return {"length": rng.randint(5, 30)}
    if kind == "cyc":
        return {"length": rng.randint(2, 30)}
    if kind == "decoy_ped":
        return {"length": rng.randint(1, 4)}
    if kind == "decoy_cyc":
        return {"length": 1}
    raise ValueError(kind)


def plan_layout(spec: TripSpec) -> list[_Slot]:
    rng = random.Random(f"layout:{spec.layout_seed}")
    kinds = (["cf"] * spec.car_following + ["cut"] * spec.cut_in + ["lc"] * spec.lane_change
             + ["lcl"] * spec.lane_change_with_lead + ["ped"] * spec.pedestrian + ["cyc"] * spec.cyclist)
    kinds += [rng.choice(("decoy_ped", "decoy_cyc")) for _ in range(spec.decoys)]
    rng.shuffle(kinds)
    slots = []
    t = rng.randint(5, 20)
    obstacle = 1
    for i, kind in enumerate(kinds):
        shape = _slot_length(kind, rng)
        if i == 0 and spec.first_event_tick >= 0:
            lead = shape.get("pre", 0) + (_LC_HALF if kind in ("lc", "lcl") else 0)
            t = spec.first_event_tick - lead
            if t < 0:
                raise InfeasibleSpec(f"first_event_tick={spec.first_event_tick} leaves no room before a {kind} slot")
        s = _Slot(kind, t, obstacle=obstacle, **shape)
        obstacle += 1
        if kind in ("cf", "cut", "lcl"):
            s.target_type = rng.choice(_VEHICLE_TYPES)
        elif kind in ("ped", "decoy_ped"):
            s.target_type = PEDESTRIAN_TYPE
        elif kind in ("cyc", "decoy_cyc"):
            s.target_type = CYCLIST_TYPE
        if kind in ("lc", "lcl"):
            s.lane = _plan_lane_change(rng, t + _LC_HALF, rng.choice((Direction.LEFT, Direction.RIGHT)))
        s.fields = {
            "range0": rng.uniform(8.0, 60.0),
            "lateral0": rng.uniform(-4.0, -1.0) if rng.random() < 0.5 else rng.uniform(1.0, 4.0),
        }
        slots.append(s)
        t = s.end + 1 + rng.randint(3, 25)
    if slots and slots[-1].end > spec.length_ticks - 5:
        raise InfeasibleSpec(
            f"planted events need {slots[-1].end + 5} ticks but length_ticks={spec.length_ticks}")
    return slots


def _intervals_complement(covered: list[tuple[int, int]], lo: int, hi: int) -> list[tuple[int, int]]:
    out = []
    cursor = lo
    for a, b in sorted(covered):
        if a > cursor:
            out.append((cursor, a - 1))
        cursor = max(cursor, b + 1)
    if cursor <= hi:
        out.append((cursor, hi))
    return out


def ground_truth(spec: TripSpec, slots: list[_Slot]) -> GroundTruth:
    key = TripKey(spec.device, spec.trip)
    n = spec.length_ticks
    covered = []
    follow = []
    cuts = []
    lanes = []
    vru = {PEDESTRIAN_TYPE: [], CYCLIST_TYPE: []}
    decoys = 0
    for s in slots:
        if s.kind != "lc":
            covered.append((s.start, s.end))
        if s.kind == "cf":
            follow.append((s.start, s.end))
        elif s.kind == "cut":
            c = s.start + s.pre
            follow.append((c, s.end))
            cuts.append(c)
        elif s.kind in ("lc", "lcl"):
            x1, x2 = s.lane.x_times()
            lanes.append((s.lane.cross_time, s.lane.direction, x1, x2))
            if s.kind == "lcl":
                follow += [(s.start, x1 - 1), (x2 + 1, s.end)]
        elif s.kind in ("ped", "cyc"):
            vru[s.target_type].append((s.start, s.end, s.obstacle))
        else:
            decoys += 1
    events = []
    for i, (a, b) in enumerate(_intervals_complement(covered, 0, n - 1)):
        events.append(ScenarioEvent(Scenario.FREE_FLOW, key, i, a, b))
    for i, (a, b) in enumerate(sorted(follow)):
        events.append(ScenarioEvent(Scenario.CAR_FOLLOWING, key, i, a, b))
    for i, c in enumerate(sorted(cuts)):
        events.append(ScenarioEvent(Scenario.CUT_IN, key, i, max(0, c - _CUTIN_WINDOW),
                                    min(n - 1, c + _CUTIN_WINDOW), cut_tick=c))
    for i, (ct, d, x1, x2) in enumerate(sorted(lanes, key=lambda x: x[0])):
        events.append(ScenarioEvent(Scenario.LANE_CHANGE, key, i, x1, x2, cross_time=ct,
                                    change_direction=d, x_time1=x1, x_time2=x2))
    for tt, scen in ((PEDESTRIAN_TYPE, Scenario.PEDESTRIAN), (CYCLIST_TYPE, Scenario.CYCLIST)):
        for i, (a, b, o) in enumerate(sorted(vru[tt])):
            events.append(ScenarioEvent(scen, key, i, a, b, obstacle_id=o))
    return GroundTruth(key, events, decoys)


# --- samples ---------------------------------------------------------------

def _wsu_rows(spec: TripSpec, rng: random.Random) -> tuple[list, float, float]:
    lrng = random.Random(f"route:{spec.layout_seed}")
    lat, lon = spec.latitude + lrng.uniform(-0.05, 0.05), spec.longitude + lrng.uniform(-0.05, 0.05)
    heading = lrng.uniform(0, 360)
    turn_period = lrng.uniform(300, 1500)
    turn_amp = lrng.uniform(0.0, 0.4)
    speed0 = lrng.uniform(8.0, 25.0)
    rows = []
    dist = dist25 = 0.0
    d, tr = spec.device, spec.trip
    for t in range(spec.length_ticks):
        speed = max(0.0, speed0 + 3.0 * math.sin(t / 200.0) + rng.uniform(-0.2, 0.2))
        heading = (heading + turn_amp * math.sin(t / turn_period * 2 * math.pi)) % 360.0
        if heading >= 360.0:
            heading = 0.0
        h = math.radians(heading)
        step = speed * 0.1
        lat += step * math.cos(h) / METERS_PER_DEG
        lon += step * math.sin(h) / (METERS_PER_DEG * math.cos(math.radians(lat)))
        dist += step
        if speed > 11.176:  # 25 mph
            dist25 += step
        rows.append(WsuSample(d, tr, t, lat, lon, heading, speed))
    return rows, dist, dist25


def _front_rows(spec: TripSpec, slots: list[_Slot], rng: random.Random) -> list:
    rows = []
    d, tr = spec.device, spec.trip
    for s in slots:
        if s.kind == "lc":
            continue
        r0, l0 = s.fields["range0"], s.fields["lateral0"]
        for i, t in enumerate(range(s.start, s.end + 1)):
            frac = i / max(1, s.length - 1)
            if s.kind in ("ped", "cyc", "decoy_ped", "decoy_cyc"):
                rng_d = max(1.0, r0 * (1 - 0.5 * frac))
                lateral = l0 - 2 * l0 * frac  # crosses the path
                cipv = 0
            elif s.kind == "cut":
                cipv = 1 if i >= s.pre else 0
                rng_d = max(2.0, r0 - 0.05 * i)
                lateral = l0 * max(0.0, 1 - i / max(1, s.pre)) if cipv == 0 else 0.2 * math.sin(i / 10)
            else:
                cipv = 1
                rng_d = max(2.0, r0 + 5 * math.sin(i / 30))
                lateral = 0.2 * math.sin(i / 10)
            rows.append(FrontTargetSample(
                d, tr, t, s.obstacle, s.target_type, cipv,
                rng_d + rng.uniform(-0.1, 0.1), lateral + rng.uniform(-0.05, 0.05),
                rng.uniform(-1.0, 1.0),
            ))
    rows.sort(key=lambda r: (r.time, r.obstacle_id))
    return rows


def _lane_rows(spec: TripSpec, slots: list[_Slot], rng: random.Random) -> list:
    changes = {}
    protected = set()
    for s in slots:
        if s.lane is not None:
            for t in range(s.start, s.end + 1):
                changes[t] = s.lane
                protected.add(t)
    j = spec.lane_jitter_m
    p = spec.quality_dropout
    steady = (-LANE_WIDTH_M / 2, LANE_WIDTH_M / 2)
    rows = []
    d, tr = spec.device, spec.trip
    for t in range(spec.length_ticks):
        lc = changes.get(t)
        left, right = lc.distances(t) if lc else steady
        left += rng.uniform(-j, j) if j else 0.0
        right += rng.uniform(-j, j) if j else 0.0
        ql, qr = rng.choice((2, 3)), rng.choice((2, 3))
        if t not in protected:
            if rng.random() < p:
                ql, left = rng.choice((0, 1)), rng.uniform(-6.0, 6.0)
            if rng.random() < p:
                qr, right = rng.choice((0, 1)), rng.uniform(-6.0, 6.0)
        rows.append(LaneSample(d, tr, t, left, right, ql, qr))
    return rows


def generate_trip(spec: TripSpec) -> tuple[TripBundle, GroundTruth]:
    """Raw samples of one trip and the events planted in it."""
    if spec.trips != 1:
        raise InfeasibleSpec("generate_trip takes a single-trip spec; use TripSpec.expand()")
    slots = plan_layout(spec)
    truth = ground_truth(spec, slots)
    rng = random.Random(f"noise:{spec.seed}:{spec.device}:{spec.trip}")
    wsu, dist, dist25 = _wsu_rows(spec, rng)
    fts = _front_rows(spec, slots, rng)
    lanes = _lane_rows(spec, slots, rng)
    summary = TripSummaryRow(spec.device, spec.trip, 0, spec.length_ticks - 1, dist,
                             random.Random(f"brakes:{spec.layout_seed}").randint(0, 40), dist25)
    bundle = TripBundle(TripKey(spec.device, spec.trip), tuple(wsu), tuple(fts), tuple(lanes), summary)
    return bundle, truth


def iter_trips(specs: Iterable[TripSpec]) -> Iterator[tuple[TripBundle, GroundTruth]]:
    for spec in specs:
        for one in spec.expand():
            yield generate_trip(one)


# --- ground truth file -----------------------------------------------------

TRUTH_COLUMNS = ("Scenario", "Device", "Trip", "EventId", "StartTime", "EndTime",
                 "CrossTime", "ChangeDirection", "XTime1", "XTime2", "CutTime", "ObstacleId")


def _blank(v):
    if v is None:
        return ""
    if isinstance(v, Direction):
        return v.value
    return v


def truth_row(e: ScenarioEvent) -> tuple:
    return (e.scenario.slug, e.key.device, e.key.trip, e.event_id, e.start_tick, e.end_tick,
            _blank(e.cross_time), _blank(e.change_direction), _blank(e.x_time1), _blank(e.x_time2),
            _blank(e.cut_tick), _blank(e.obstacle_id))


def read_truth(path) -> list[ScenarioEvent]:
    def opt(v):
        return int(v) if v != "" else None

    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(ScenarioEvent(
                Scenario.from_slug(row["Scenario"]), TripKey(int(row["Device"]), int(row["Trip"])),
                int(row["EventId"]), int(row["StartTime"]), int(row["EndTime"]),
                cross_time=opt(row["CrossTime"]),
                change_direction=Direction(row["ChangeDirection"]) if row["ChangeDirection"] else None,
                x_time1=opt(row["XTime1"]), x_time2=opt(row["XTime2"]),
                cut_tick=opt(row["CutTime"]), obstacle_id=opt(row["ObstacleId"]),
            ))
    return out


def write_dataset(directory, specs: Iterable[TripSpec]) -> dict:
    """Write raw tables plus ground_truth.csv; returns simple totals."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    totals = {"trips": 0, "rows": 0, "events": 0, "decoys": 0}
    with TableWriter(directory) as tw, \
            open(directory / "ground_truth.csv", "w", newline="", encoding="utf-8") as gt:
        w = csv.writer(gt, lineterminator="\n")
        w.writerow(TRUTH_COLUMNS)
        for bundle, truth in iter_trips(specs):
            tw.write_bundle(bundle)
            w.writerows(truth_row(e) for e in truth.events)
            totals["trips"] += 1
            totals["rows"] += len(bundle.wsu) + len(bundle.front_targets) + len(bundle.lanes) + 1
            totals["events"] += len(truth.events)
            totals["decoys"] += truth.decoys
    return totals


def random_spec(seed: int, device: int = 1) -> TripSpec:
    """A randomized single-trip spec for closed-loop corpora; trip id = seed."""
    rng = random.Random(f"spec:{seed}")
    counts = dict(
        car_following=rng.randint(1, 5),
        cut_in=rng.randint(1, 5),
        lane_change=rng.randint(1, 3),
        lane_change_with_lead=rng.randint(0, 2),
        pedestrian=rng.randint(1, 4),
        cyclist=rng.randint(1, 3),
        decoys=rng.randint(0, 3),
    )
    slots = sum(counts.values())
    return TripSpec(
        length_ticks=120 * slots + rng.randint(100, 400),
        lane_jitter_m=round(rng.uniform(0.0, MAX_JITTER_M), 4),
        quality_dropout=round(rng.uniform(0.0, MAX_DROPOUT), 4),
        seed=seed,
        layout_seed=seed,
        device=device,
        trip=seed,
        **counts,
    )


def scale_specs(target_rows: int, trip_ticks: int = 45_000, device: int = 1) -> list[TripSpec]:
    """Long, event-dense trips whose raw tables hold at least ``target_rows`` rows."""
    specs = []
    rows = 0
    i = 0
    # front-target counts vary with the layout; aim a little high
    while rows < target_rows * 1.03:
        s = TripSpec(length_ticks=trip_ticks, car_following=60, cut_in=60, lane_change=40,
                     lane_change_with_lead=20, pedestrian=40, cyclist=30, decoys=20,
                     seed=i, layout_seed=i, device=device, trip=i)
        if not specs:
            b, _ = generate_trip(s)
            per_trip = len(b.wsu) + len(b.front_targets) + len(b.lanes) + 1
        specs.append(s)
        rows += per_trip
        i += 1
    return specs
