"""Directory-level extraction: raw tables in, scenario tables out.

Tables are spooled per trip to a scratch directory, each trip is extracted
by a worker which writes its own part files, and the parts are concatenated
in (scenario, device, trip) order.  Output is therefore byte-identical for
any worker count.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import tempfile
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from . import tables
from .extract import ALL_SCENARIOS, extract_all
from .ingest import (
    DEFAULT_SPILL_ROWS,
    KIND_ORDER,
    TableSpool,
    assemble_bundle,
    iter_values,
    resolve_handle,
)
from .model import ExtractionConfig, Rejection, Scenario, TableKind, TripKey

log = logging.getLogger(__name__)

REQUIRED_TABLES = (TableKind.WSU, TableKind.FRONT_TARGETS, TableKind.LANE)


class MissingTableError(FileNotFoundError):
    pass


@dataclass
class RunManifest:
    config: dict
    scenarios: list
    inputs: dict = field(default_factory=dict)
    rows: dict = field(default_factory=dict)
    rejections: dict = field(default_factory=dict)
    duplicates: dict = field(default_factory=dict)
    events: dict = field(default_factory=dict)
    sequence_rows: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)
    trips: int = 0
    jobs: int = 1
    wall_time_s: float = 0.0

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class SpoolResult:
    kind: TableKind
    handles: dict
    rows: int
    rejected: int
    reject_log: Optional[str]


def spool_table(path, kind: TableKind, directory, threshold: int = DEFAULT_SPILL_ROWS) -> SpoolResult:
    """Parse and validate one table into per-trip spill files under ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    spool = TableSpool(kind, directory, threshold)
    reject_path = directory / "rejections.txt"
    rejected = 0
    with open(reject_path, "w", encoding="utf-8") as rej:
        def accepted():
            nonlocal rejected
            for item in iter_values(path, kind):
                if type(item) is Rejection:
                    rejected += 1
                    rej.write(item.line() + "\n")
                else:
                    yield item
        spool.extend(accepted())
    spool.spill()
    return SpoolResult(kind, {k: str(p) for k, p in spool.files.items()}, spool.rows, rejected, str(reject_path))


def _spool_job(args) -> SpoolResult:
    return spool_table(*args)


@dataclass
class TripOutcome:
    key: TripKey
    events: dict
    sequence_rows: dict
    duplicates: dict
    counters: Counter


def _part_name(index: int) -> str:
    return f"{index:09d}"


def process_trip(key: TripKey, handles, cfg: ExtractionConfig, scenarios, part_dir, index: int) -> TripOutcome:
    bundle = assemble_bundle(key, *(resolve_handle(h) for h in handles))
    results = extract_all(bundle, cfg, scenarios)
    part_dir = Path(part_dir)
    events, seq_rows = {}, {}
    counters: Counter = Counter()
    for s, res in results.items():
        events[s.slug] = len(res.events)
        seq_rows[s.slug] = len(res.sequence)
        counters.update(res.counters)
        if res.events:
            with open(part_dir / s.slug / (_part_name(index) + ".event"), "w", newline="", encoding="utf-8") as fh:
                tables.write_rows(fh, (tables.event_row(e) for e in res.events))
        if res.sequence:
            with open(part_dir / s.slug / (_part_name(index) + ".sequence"), "w", newline="", encoding="utf-8") as fh:
                tables.write_rows(fh, (tables.sequence_row(r) for r in res.sequence))
    return TripOutcome(key, events, seq_rows, bundle.duplicates, counters)


def _trip_job(args) -> TripOutcome:
    return process_trip(*args)


def _concat(dest: Path, header: str, parts: Iterable[Path]) -> None:
    with open(dest, "w", encoding="utf-8", newline="") as out:
        out.write(header)
        out.flush()
        for p in parts:
            if p.exists():
                with open(p, "r", encoding="utf-8", newline="") as fh:
                    shutil.copyfileobj(fh, out, 1 << 20)


def run_extract(
    input_dir,
    output_dir,
    scenarios: Iterable[Scenario] = ALL_SCENARIOS,
    cfg: Optional[ExtractionConfig] = None,
    jobs: int = 1,
    spill_threshold: int = DEFAULT_SPILL_ROWS,
    work_dir=None,
) -> RunManifest:
    t0 = time.perf_counter()
    cfg = cfg or ExtractionConfig()
    scenarios = [s for s in ALL_SCENARIOS if s in set(scenarios)]
    jobs = max(1, int(jobs))
    input_dir, output_dir = Path(input_dir), Path(output_dir)
    for kind in REQUIRED_TABLES:
        if not (input_dir / kind.filename).is_file():
            raise MissingTableError(f"required input table {kind.filename} not found in {input_dir}")
    kinds = [k for k in KIND_ORDER if (input_dir / k.filename).is_file()]
    output_dir.mkdir(parents=True, exist_ok=True)

    manifest = RunManifest(config=cfg.as_dict(), scenarios=[s.slug for s in scenarios], jobs=jobs)
    for kind in kinds:
        manifest.inputs[kind.filename] = file_digest(input_dir / kind.filename)

    with tempfile.TemporaryDirectory(prefix="scenariomine-", dir=work_dir) as tmp:
        tmp = Path(tmp)
        spool_args = [(input_dir / k.filename, k, tmp / "spool" / k.value, spill_threshold) for k in kinds]
        pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
        try:
            if pool is not None:
                spooled = list(pool.map(_spool_job, spool_args))
            else:
                spooled = [_spool_job(a) for a in spool_args]
            by_kind = {r.kind: r for r in spooled}
            for r in spooled:
                manifest.rows[r.kind.value] = r.rows
                manifest.rejections[r.kind.value] = r.rejected
                log.info("%s: %d rows, %d rejected", r.kind.value, r.rows, r.rejected)

            keys = sorted(set().union(*(r.handles for r in spooled)))
            part_dir = tmp / "parts"
            for s in scenarios:
                (part_dir / s.slug).mkdir(parents=True)
            tasks = []
            for i, key in enumerate(keys):
                handles = tuple(by_kind[k].handles.get(key) if k in by_kind else None for k in KIND_ORDER)
                tasks.append((key, handles, cfg, scenarios, part_dir, i))
            if pool is not None:
                outcomes = list(pool.map(_trip_job, tasks, chunksize=1))
            else:
                outcomes = [_trip_job(t) for t in tasks]
        finally:
            if pool is not None:
                pool.shutdown()

        manifest.trips = len(keys)
        dups: Counter = Counter()
        counters: Counter = Counter()
        ev_counts: Counter = Counter({s.slug: 0 for s in scenarios})
        seq_counts: Counter = Counter({s.slug: 0 for s in scenarios})
        for o in outcomes:
            dups.update(o.duplicates)
            counters.update(o.counters)
            ev_counts.update(o.events)
            seq_counts.update(o.sequence_rows)
        manifest.duplicates = {k.value: dups.get(k.value, 0) for k in KIND_ORDER}
        manifest.counters = dict(sorted(counters.items()))
        manifest.events = dict(ev_counts)
        manifest.sequence_rows = dict(seq_counts)

        n = len(keys)
        for s in scenarios:
            d = part_dir / s.slug
            _concat(tables.event_path(output_dir, s), tables.header_line(tables.event_columns(s)),
                    (d / (_part_name(i) + ".event") for i in range(n)))
            _concat(tables.sequence_path(output_dir, s), tables.header_line(tables.sequence_columns(s)),
                    (d / (_part_name(i) + ".sequence") for i in range(n)))
        _concat(output_dir / "rejections.log", "TABLE,DEVICE,TRIP,TIME,REASON\n",
                (Path(r.reject_log) for r in spooled))

    counts = tables.scenario_counts(output_dir, scenarios)
    tables.write_stats(output_dir, [(t, n) for t, n in counts])
    manifest.wall_time_s = round(time.perf_counter() - t0, 3)
    manifest.write(output_dir / "manifest.json")
    log.info("extracted %d trips in %.1fs: %s", manifest.trips, manifest.wall_time_s, manifest.events)
    return manifest


def default_jobs() -> int:
    return os.cpu_count() or 1
