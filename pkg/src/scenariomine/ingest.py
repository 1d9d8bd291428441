"""Streaming CSV ingest and per-trip partitioning.

Rows are parsed into plain value tuples, validated, and bucketed per trip
in a :class:`TableSpool`.  Buckets spill to pickle files once the number of
buffered rows passes a threshold, so memory stays bounded however large the
input is.  Bundles are assembled one trip at a time: sorted (only when the
bucket is out of order), de-duplicated keep-first, then typed.
"""
from __future__ import annotations

import csv
import logging
import os
import pickle
import tempfile
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional

from .model import (
    PROBLEM_CHECKS,
    FrontTargetSample,
    LaneSample,
    Rejection,
    TableKind,
    TripBundle,
    TripKey,
    TripSummaryRow,
    WsuSample,
)

log = logging.getLogger(__name__)

HEADERS = {
    TableKind.WSU: ["Device", "Trip", "Time", "Latitude", "Longitude", "Heading", "Speed"],
    TableKind.FRONT_TARGETS: [
        "Device", "Trip", "Time", "ObstacleId", "TargetType", "CIPV", "Range", "Transversal", "RangeRate",
    ],
    TableKind.LANE: ["Device", "Trip", "Time", "LaneDisL", "LaneDisR", "QualityLeft", "QualityRight"],
    TableKind.TRIP_SUMMARY: [
        "Device", "Trip", "StartTime", "EndTime", "DistanceM", "BrakeCount", "DistanceOver25mphM",
    ],
}

DEFAULT_SPILL_ROWS = 250_000


class SchemaError(ValueError):
    pass


def _parse_wsu(f):
    d, t, tm, la, lo, h, s = f
    return (int(d), int(t), int(tm), float(la), float(lo), float(h), float(s))


def _parse_ft(f):
    d, t, tm, o, ty, c, r, lat, rr = f
    return (int(d), int(t), int(tm), int(o), int(ty), int(c), float(r), float(lat), float(rr))


def _parse_lane(f):
    d, t, tm, l, r, ql, qr = f
    return (int(d), int(t), int(tm), float(l), float(r), int(ql), int(qr))


def _parse_summary(f):
    d, t, st, en, dist, b, d25 = f
    return (int(d), int(t), int(st), int(en), float(dist), int(b), float(d25))


_PARSERS = {
    TableKind.WSU: _parse_wsu,
    TableKind.FRONT_TARGETS: _parse_ft,
    TableKind.LANE: _parse_lane,
    TableKind.TRIP_SUMMARY: _parse_summary,
}


def check_header(header: list[str], kind: TableKind, path="") -> None:
    expected = HEADERS[kind]
    got = [h.strip() for h in header]
    if got == expected:
        return
    missing = [c for c in expected if c not in got]
    unexpected = [c for c in got if c not in expected]
    detail = f"missing {missing}, unexpected {unexpected}" if (missing or unexpected) else "columns out of order"
    raise SchemaError(f"{path or kind.filename}: header mismatch for {kind.value}: {detail}")


def iter_values(path, kind: TableKind) -> Iterator:
    """Yield validated value tuples, or :class:`Rejection` for bad rows, in file order."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing input table {path}")
    parse = _PARSERS[kind]
    problem = PROBLEM_CHECKS[kind]
    width = len(HEADERS[kind])
    name = kind.value
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file, no header row")
        check_header(header, kind, path)
        for fields in reader:
            if not fields:
                continue
            try:
                values = parse(fields)
            except ValueError:
                k = (fields + ["", "", ""])[:3]
                reason = "wrong field count" if len(fields) != width else "unparseable field"
                yield Rejection(name, k[0], k[1], k[2], reason)
                continue
            why = problem(values)
            if why is None:
                yield values
            else:
                yield Rejection(name, fields[0], fields[1], fields[2], why)


class TableStream:
    """Iterable of typed samples from one table; rejections are counted and logged.

    With no ``on_reject`` callback, rejections are kept in ``self.rejections``.
    """

    def __init__(self, path, kind: TableKind, on_reject: Optional[Callable[[Rejection], None]] = None):
        self.path = Path(path)
        self.kind = kind
        self.rows = 0
        self.rejected = 0
        self.rejections: list[Rejection] = []
        self._on_reject = on_reject if on_reject is not None else self.rejections.append
        self._values = iter_values(self.path, kind)
        # surface a missing file / bad header immediately, not on first next()
        self._first = next(self._values, None)

    def values(self) -> Iterator[tuple]:
        item = self._first
        self._first = None
        if item is not None:
            yield from self._accept(item)
        for item in self._values:
            yield from self._accept(item)

    def _accept(self, item):
        if type(item) is Rejection:
            self.rejected += 1
            self._on_reject(item)
            log.debug("rejected %s", item.line())
        else:
            self.rows += 1
            yield item

    def __iter__(self):
        cls = self.kind.sample_type
        new = tuple.__new__
        for v in self.values():
            yield new(cls, v)


def load_table(path, kind: TableKind, on_reject=None) -> TableStream:
    """Open one raw table as a stream of validated samples."""
    return TableStream(path, kind, on_reject)


class TableSpool:
    """Per-trip row buckets for one table, spilling to disk above a row threshold."""

    def __init__(self, kind: TableKind, directory=None, threshold: int = DEFAULT_SPILL_ROWS):
        self.kind = kind
        self.threshold = max(1, threshold)
        self._dir = Path(directory) if directory is not None else None
        self._own_dir: Optional[tempfile.TemporaryDirectory] = None
        self.buffers: dict[TripKey, list] = defaultdict(list)
        self.files: dict[TripKey, Path] = {}
        self.buffered = 0
        self.rows = 0
        self.spills = 0

    def add(self, values: tuple) -> None:
        self.buffers[TripKey(values[0], values[1])].append(values)
        self.buffered += 1
        self.rows += 1
        if self.buffered >= self.threshold:
            self.spill()

    def extend(self, values_iter: Iterable[tuple]) -> None:
        buffers = self.buffers
        # inlined add(): this is the hottest loop of the pipeline
        n = self.buffered
        cur_key = None
        bucket = None
        for v in values_iter:
            k = (v[0], v[1])
            if k != cur_key:
                cur_key = k
                bucket = buffers[TripKey(*k)]
            bucket.append(v)
            n += 1
            if n >= self.threshold:
                self.rows += n - self.buffered
                self.buffered = n
                self.spill()
                buffers = self.buffers
                n = 0
                cur_key = None
        self.rows += n - self.buffered
        self.buffered = n

    @property
    def directory(self) -> Path:
        if self._dir is None:
            self._own_dir = tempfile.TemporaryDirectory(prefix="spool-")
            self._dir = Path(self._own_dir.name)
        self._dir.mkdir(parents=True, exist_ok=True)
        return self._dir

    def spill(self) -> None:
        if not self.buffered:
            return
        d = self.directory
        for key, rows in self.buffers.items():
            if not rows:
                continue
            path = self.files.get(key)
            if path is None:
                path = d / f"{self.kind.value}_{key.device}_{key.trip}.pkl"
                self.files[key] = path
            with open(path, "ab") as fh:
                pickle.dump(rows, fh, protocol=pickle.HIGHEST_PROTOCOL)
        self.buffers = defaultdict(list)
        self.buffered = 0
        self.spills += 1

    def keys(self) -> set[TripKey]:
        return set(self.files) | {k for k, v in self.buffers.items() if v}

    def load(self, key: TripKey) -> list:
        rows = read_spill(self.files[key]) if key in self.files else []
        rows.extend(self.buffers.get(key, ()))
        return rows

    def handle(self, key: TripKey):
        """Picklable reference to a trip's rows: a file path, or the rows themselves."""
        if key in self.buffers and self.buffers[key]:
            return self.load(key)
        return self.files.get(key)

    def cleanup(self) -> None:
        for path in self.files.values():
            path.unlink(missing_ok=True)
        self.files = {}
        if self._own_dir is not None:
            self._own_dir.cleanup()
            self._own_dir = None


def read_spill(path) -> list:
    rows: list = []
    with open(path, "rb") as fh:
        while True:
            try:
                rows.extend(pickle.load(fh))
            except EOFError:
                return rows


def resolve_handle(h) -> list:
    if h is None:
        return []
    if isinstance(h, (str, os.PathLike)):
        return read_spill(h)
    return list(h)


def _sorted_unique(rows: list, keyfunc) -> tuple[list, int]:
    """Stable-sort rows by keyfunc (skipped when already sorted), drop repeated keys."""
    keys = [keyfunc(r) for r in rows]
    if any(a > b for a, b in zip(keys, keys[1:])):
        order = sorted(range(len(rows)), key=keys.__getitem__)
        rows = [rows[i] for i in order]
        keys = [keys[i] for i in order]
    out = []
    dups = 0
    last = object()
    for r, k in zip(rows, keys):
        if k == last:
            dups += 1
            continue
        out.append(r)
        last = k
    return out, dups


def _time_key(r):
    return r[2]


def _time_obstacle_key(r):
    return (r[2], r[3])


def assemble_bundle(key: TripKey, wsu, front_targets, lanes, summaries) -> TripBundle:
    """Build a TripBundle from unsorted value tuples of one trip."""
    new = tuple.__new__
    w, w_dup = _sorted_unique(list(wsu), _time_key)
    f, f_dup = _sorted_unique(list(front_targets), _time_obstacle_key)
    l, l_dup = _sorted_unique(list(lanes), _time_key)
    summaries = list(summaries)
    s_dup = max(0, len(summaries) - 1)
    return TripBundle(
        key=key,
        wsu=tuple([new(WsuSample, r) for r in w]),
        front_targets=tuple([new(FrontTargetSample, r) for r in f]),
        lanes=tuple([new(LaneSample, r) for r in l]),
        summary=new(TripSummaryRow, summaries[0]) if summaries else None,
        duplicates={
            TableKind.WSU.value: w_dup,
            TableKind.FRONT_TARGETS.value: f_dup,
            TableKind.LANE.value: l_dup,
            TableKind.TRIP_SUMMARY.value: s_dup,
        },
    )


@dataclass
class PartitionStats:
    rows: dict = field(default_factory=dict)
    duplicates: dict = field(default_factory=lambda: defaultdict(int))
    bundles: int = 0
    spills: int = 0


KIND_ORDER = (TableKind.WSU, TableKind.FRONT_TARGETS, TableKind.LANE, TableKind.TRIP_SUMMARY)


def partition_by_trip(
    wsu: Iterable = (),
    front_targets: Iterable = (),
    lanes: Iterable = (),
    summaries: Iterable = (),
    spill_threshold: int = DEFAULT_SPILL_ROWS,
    spill_dir=None,
    stats: Optional[PartitionStats] = None,
) -> Iterator[TripBundle]:
    """Group four sample streams into TripBundles in ascending (device, trip) order.

    Streams may be TableStreams, iterables of samples, or iterables of value
    tuples; order within each stream does not matter.
    """
    stats = stats if stats is not None else PartitionStats()
    spools = {}
    try:
        for kind, stream in zip(KIND_ORDER, (wsu, front_targets, lanes, summaries)):
            sub = Path(spill_dir) / kind.value if spill_dir is not None else None
            sp = TableSpool(kind, sub, spill_threshold)
            it = stream.values() if isinstance(stream, TableStream) else (tuple(s) for s in stream)
            sp.extend(it)
            spools[kind] = sp
            stats.rows[kind.value] = sp.rows
            stats.spills += sp.spills
        keys = sorted(set().union(*(sp.keys() for sp in spools.values())))
        for key in keys:
            b = assemble_bundle(key, *(spools[k].load(key) for k in KIND_ORDER))
            for t, n in b.duplicates.items():
                stats.duplicates[t] += n
            stats.bundles += 1
            yield b
    finally:
        for sp in spools.values():
            sp.cleanup()


# --- writing ---------------------------------------------------------------

def write_table(path, kind: TableKind, rows: Iterable) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADERS[kind])
        for r in rows:
            w.writerow(r)
            n += 1
    return n


class TableWriter:
    """Append rows of the four raw tables into a directory, one file per table."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._fh = {}
        self._w = {}
        for kind in KIND_ORDER:
            fh = open(self.directory / kind.filename, "w", newline="", encoding="utf-8")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HEADERS[kind])
            self._fh[kind], self._w[kind] = fh, w

    def write(self, kind: TableKind, rows: Iterable) -> None:
        self._w[kind].writerows(rows)

    def write_bundle(self, b: TripBundle) -> None:
        self.write(TableKind.WSU, b.wsu)
        self.write(TableKind.FRONT_TARGETS, b.front_targets)
        self.write(TableKind.LANE, b.lanes)
        if b.summary is not None:
            self.write(TableKind.TRIP_SUMMARY, [b.summary])

    def close(self) -> None:
        for fh in self._fh.values():
            fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_bundles(directory, bundles: Iterable[TripBundle]) -> None:
    with TableWriter(directory) as tw:
        for b in bundles:
            tw.write_bundle(b)


def read_bundles(directory, spill_threshold: int = DEFAULT_SPILL_ROWS) -> Iterator[TripBundle]:
    """Convenience: load all four tables from a directory (TripSummary optional)."""
    d = Path(directory)
    streams = []
    for kind in KIND_ORDER:
        p = d / kind.filename
        if kind is TableKind.TRIP_SUMMARY and not p.exists():
            streams.append(())
        else:
            streams.append(load_table(p, kind))
    return partition_by_trip(*streams, spill_threshold=spill_threshold)
