"""Record types, keys and validity rules shared across the pipeline.

Time is an integer tick at 10 Hz: 10 ticks = 1 s.  Raw samples are
NamedTuples so they stay cheap at tens of millions of rows; everything
else is a frozen dataclass.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Union

TICKS_PER_SECOND = 10


class TripKey(NamedTuple):
    device: int
    trip: int


class RowKey(NamedTuple):
    device: int
    trip: int
    time: int

    @property
    def trip_key(self) -> TripKey:
        return TripKey(self.device, self.trip)


class WsuSample(NamedTuple):
    device: int
    trip: int
    time: int
    latitude: float
    longitude: float
    heading: float
    speed: float

    @property
    def key(self) -> RowKey:
        return RowKey(self.device, self.trip, self.time)


class FrontTargetSample(NamedTuple):
    device: int
    trip: int
    time: int
    obstacle_id: int
    target_type: int
    cipv: int
    range_d: float
    lateral_l: float
    range_rate: float

    @property
    def key(self) -> RowKey:
        return RowKey(self.device, self.trip, self.time)


class LaneSample(NamedTuple):
    device: int
    trip: int
    time: int
    lane_dis_l: float
    lane_dis_r: float
    quality_left: int
    quality_right: int

    @property
    def key(self) -> RowKey:
        return RowKey(self.device, self.trip, self.time)


class TripSummaryRow(NamedTuple):
    device: int
    trip: int
    start_tick: int
    end_tick: int
    distance_m: float
    brake_count: int
    distance_over_25mph_m: float

    @property
    def key(self) -> TripKey:
        return TripKey(self.device, self.trip)


Sample = Union[WsuSample, FrontTargetSample, LaneSample, TripSummaryRow]

PEDESTRIAN_TYPE = 3
CYCLIST_TYPE = 4
QUALITY_MAX = 3


class TableKind(enum.Enum):
    WSU = "DataWsu"
    FRONT_TARGETS = "DataFrontTargets"
    LANE = "DataLane"
    TRIP_SUMMARY = "TripSummary"

    @property
    def filename(self) -> str:
        return self.value + ".csv"

    @property
    def sample_type(self) -> type:
        return _SAMPLE_TYPES[self]


_SAMPLE_TYPES = {
    TableKind.WSU: WsuSample,
    TableKind.FRONT_TARGETS: FrontTargetSample,
    TableKind.LANE: LaneSample,
    TableKind.TRIP_SUMMARY: TripSummaryRow,
}


class Scenario(enum.Enum):
    # value is the file/CLI slug; definition order is the output merge order
    FREE_FLOW = "freeflow"
    CAR_FOLLOWING = "carfollowing"
    CUT_IN = "cutin"
    LANE_CHANGE = "lanechange"
    PEDESTRIAN = "pedestrian"
    CYCLIST = "cyclist"

    @property
    def slug(self) -> str:
        return self.value

    @property
    def title(self) -> str:
        return _TITLES[self]

    @classmethod
    def from_slug(cls, slug: str) -> "Scenario":
        for s in cls:
            if s.value == slug.lower() or s.title.lower() == slug.lower():
                return s
        raise ValueError(f"unknown scenario {slug!r}")


_TITLES = {
    Scenario.FREE_FLOW: "FreeFlow",
    Scenario.CAR_FOLLOWING: "CarFollowing",
    Scenario.CUT_IN: "CutIn",
    Scenario.LANE_CHANGE: "LaneChange",
    Scenario.PEDESTRIAN: "Pedestrian",
    Scenario.CYCLIST: "Cyclist",
}

# row order of the scenario summary table
STATS_ORDER = (
    Scenario.FREE_FLOW,
    Scenario.PEDESTRIAN,
    Scenario.CYCLIST,
    Scenario.CAR_FOLLOWING,
    Scenario.LANE_CHANGE,
    Scenario.CUT_IN,
)


class Direction(enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"


@dataclass(frozen=True)
class ScenarioEvent:
    scenario: Scenario
    key: TripKey
    event_id: int
    start_tick: int
    end_tick: int
    cross_time: Optional[int] = None
    change_direction: Optional[Direction] = None
    x_time1: Optional[int] = None
    x_time2: Optional[int] = None
    cut_tick: Optional[int] = None
    obstacle_id: Optional[int] = None

    @property
    def sort_key(self):
        return (list(Scenario).index(self.scenario), self.key, self.event_id)

    def check(self, xtime_window: int = 10) -> list[str]:
        """Return the violated event invariants (empty when valid)."""
        problems = []
        if self.start_tick > self.end_tick:
            problems.append("start_tick > end_tick")
        if self.event_id < 0:
            problems.append("negative event_id")
        if self.scenario is Scenario.LANE_CHANGE:
            x1, x2, ct = self.x_time1, self.x_time2, self.cross_time
            if None in (x1, x2, ct) or self.change_direction is None:
                problems.append("lane change missing fields")
            else:
                if not x1 <= ct <= x2:
                    problems.append("x_time1 <= cross_time <= x_time2 violated")
                if not ct - xtime_window <= x1:
                    problems.append("x_time1 earlier than cross_time-10")
                if not x2 <= ct + xtime_window:
                    problems.append("x_time2 later than cross_time+10")
        if self.scenario is Scenario.CUT_IN and self.cut_tick is None:
            problems.append("cut-in missing cut_tick")
        if self.scenario in (Scenario.PEDESTRIAN, Scenario.CYCLIST) and self.obstacle_id is None:
            problems.append("VRU event missing obstacle_id")
        return problems


class SequenceRow(NamedTuple):
    scenario: Scenario
    device: int
    trip: int
    event_id: int
    time: int
    values: tuple  # scenario-specific flattened raw columns


class Rejection(NamedTuple):
    table: str
    device: str
    trip: str
    time: str
    reason: str

    def line(self) -> str:
        return ",".join((self.table, self.device, self.trip, self.time, self.reason))


def check_event_ids(events) -> list[str]:
    """Event ids within one (scenario, trip) must be 0, 1, 2, ..."""
    seen: dict = {}
    for ev in events:
        seen.setdefault((ev.scenario, ev.key), []).append(ev.event_id)
    return [
        f"{s.slug} {k}: ids {ids[:5]}..."
        for (s, k), ids in seen.items()
        if sorted(ids) != list(range(len(ids)))
    ]


@dataclass(frozen=True)
class ExtractionConfig:
    half_width_m: float = 0.91
    lane_jump_min_m: float = 2.0
    lane_jump_max_m: float = 4.0
    lane_pair_window_ticks: int = 10
    lane_dedup_ticks: int = 20
    xtime_window_ticks: int = 10
    quality_min: int = 1  # exclusive: usable quality is > quality_min
    cutin_window_ticks: int = 50
    cutin_gap_ticks: int = 10
    cutin_require_same_obstacle: bool = True
    pedestrian_min_rows: int = 5
    cyclist_min_rows: int = 2
    vru_gap_ticks: int = 10
    freeflow_gap_ticks: int = 1

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                continue
            if not v > 0:
                raise ValueError(f"{f.name} must be positive, got {v}")
        if not self.lane_jump_min_m < self.lane_jump_max_m:
            raise ValueError("lane_jump_min_m must be < lane_jump_max_m")

    @classmethod
    def from_file(cls, path) -> "ExtractionConfig":
        return cls.from_mapping(read_key_values(path))

    @classmethod
    def from_mapping(cls, values: dict) -> "ExtractionConfig":
        return cls(**coerce_fields(cls, values))

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def read_key_values(path) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def coerce_fields(cls, values: dict) -> dict:
    """Convert string values to the declared field types of dataclass ``cls``."""
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    out = {}
    for k, v in values.items():
        if k not in types:
            raise ValueError(f"unknown {cls.__name__} field {k!r}")
        t = types[k]
        if not isinstance(v, str):
            out[k] = v
        elif t in (bool, "bool"):
            if v.lower() not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(f"{k}: not a boolean: {v!r}")
            out[k] = v.lower() in ("1", "true", "yes")
        elif t in (int, "int"):
            out[k] = int(v)
        elif t in (float, "float"):
            out[k] = float(v)
        else:
            out[k] = v
    return out


def _finite(*xs) -> bool:
    return all(math.isfinite(x) for x in xs)


# Checkers take plain value tuples in column order so ingest can run them
# before any record object exists.

def wsu_problem(t) -> Optional[str]:
    device, trip, time, lat, lon, heading, speed = t
    if device < 0 or trip < 0 or time < 0:
        return "negative key"
    if not _finite(lat, lon, heading, speed):
        return "non-finite value"
    if not -90.0 <= lat <= 90.0:
        return "latitude out of range"
    if not -180.0 <= lon <= 180.0:
        return "longitude out of range"
    if not 0.0 <= heading < 360.0:
        return "heading out of range"
    if speed < 0:
        return "negative speed"
    return None


def front_target_problem(t) -> Optional[str]:
    device, trip, time, obstacle_id, _target_type, cipv, range_d, lateral, rate = t
    if device < 0 or trip < 0 or time < 0:
        return "negative key"
    if not _finite(range_d, lateral, rate):
        return "non-finite value"
    if obstacle_id < 0:
        return "negative obstacle_id"
    if cipv != 0 and cipv != 1:
        return "cipv not 0/1"
    if range_d < 0:
        return "negative range"
    return None


def lane_problem(t) -> Optional[str]:
    device, trip, time, dis_l, dis_r, q_left, q_right = t
    if device < 0 or trip < 0 or time < 0:
        return "negative key"
    if not _finite(dis_l, dis_r):
        return "non-finite value"
    if not (0 <= q_left <= QUALITY_MAX and 0 <= q_right <= QUALITY_MAX):
        return "quality out of range"
    if q_left > 1 and q_right > 1 and dis_l > dis_r:
        return "lane_dis_l > lane_dis_r"
    return None


def summary_problem(t) -> Optional[str]:
    device, trip, start, end, dist, brakes, dist25 = t
    if device < 0 or trip < 0 or start < 0 or end < 0:
        return "negative key"
    if start > end:
        return "start after end"
    if not _finite(dist, dist25):
        return "non-finite value"
    if dist < 0 or dist25 < 0:
        return "negative distance"
    if brakes < 0:
        return "negative brake count"
    return None


PROBLEM_CHECKS = {
    TableKind.WSU: wsu_problem,
    TableKind.FRONT_TARGETS: front_target_problem,
    TableKind.LANE: lane_problem,
    TableKind.TRIP_SUMMARY: summary_problem,
}

_TABLE_OF = {
    WsuSample: TableKind.WSU,
    FrontTargetSample: TableKind.FRONT_TARGETS,
    LaneSample: TableKind.LANE,
    TripSummaryRow: TableKind.TRIP_SUMMARY,
}


def validate_sample(s: Sample) -> Union[Sample, Rejection]:
    """Return ``s`` unchanged if it is valid, otherwise a Rejection."""
    kind = _TABLE_OF.get(type(s))
    if kind is None:
        raise TypeError(f"not a raw sample: {type(s).__name__}")
    problem = PROBLEM_CHECKS[kind](s)
    if problem is None:
        return s
    return Rejection(kind.value, str(s.device), str(s.trip), str(s[2]), problem)


@dataclass(frozen=True)
class TripBundle:
    key: TripKey
    wsu: tuple = ()
    front_targets: tuple = ()
    lanes: tuple = ()
    summary: Optional[TripSummaryRow] = None
    duplicates: dict = field(default_factory=dict, compare=False)

    def span(self) -> Optional[tuple[int, int]]:
        """Trip bounds: hull of the summary interval and every observed tick."""
        lo, hi = [], []
        if self.summary is not None:
            lo.append(self.summary.start_tick)
            hi.append(self.summary.end_tick)
        for rows in (self.wsu, self.front_targets, self.lanes):
            if rows:
                lo.append(rows[0].time)
                hi.append(rows[-1].time)
        if not lo:
            return None
        return min(lo), max(hi)

    def check(self) -> list[str]:
        problems = []
        for name in ("wsu", "front_targets", "lanes"):
            rows = getattr(self, name)
            if any((r.device, r.trip) != self.key for r in rows):
                problems.append(f"{name}: foreign key")
            if name == "front_targets":
                ks = [(r.time, r.obstacle_id) for r in rows]
                if any(a >= b for a, b in zip(ks, ks[1:])):
                    problems.append(f"{name}: not sorted/unique by (tick, obstacle)")
            else:
                ts = [r.time for r in rows]
                if any(a >= b for a, b in zip(ts, ts[1:])):
                    problems.append(f"{name}: ticks not strictly increasing")
        if self.summary is not None and self.summary.key != self.key:
            problems.append("summary: foreign key")
        return problems
