"""Command-line entry point: extract, stats, geojson, gen, verify.

Exit codes: 0 success, 1 verification disagreement, 2 structural error
(missing table, bad header, unreadable config, infeasible spec).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import tables
from .geo import GeoError, GeoPoint, emit_geojson
from .ingest import SchemaError
from .model import ExtractionConfig, Scenario
from .pipeline import MissingTableError, default_jobs, run_extract

log = logging.getLogger("scenariomine")

EXIT_OK, EXIT_DIFF, EXIT_STRUCTURAL = 0, 1, 2
SCENARIO_CHOICES = ["all"] + [s.slug for s in Scenario]


class UsageError(Exception):
    pass


def parse_scenarios(text: str) -> list[Scenario]:
    out = []
    for part in text.split(","):
        part = part.strip().lower()
        if part == "all":
            return list(Scenario)
        try:
            s = Scenario.from_slug(part)
        except (KeyError, ValueError):
            raise UsageError(f"unknown scenario {part!r}; choose from {', '.join(SCENARIO_CHOICES)}")
        if s not in out:
            out.append(s)
    return out


def load_config(path) -> ExtractionConfig:
    if path is None:
        return ExtractionConfig()
    try:
        return ExtractionConfig.from_file(path)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config {path}: {exc}")


def cmd_extract(args) -> int:
    cfg = load_config(args.config)
    scenarios = parse_scenarios(args.scenario)
    m = run_extract(args.input, args.output, scenarios, cfg, jobs=args.jobs,
                    spill_threshold=args.spill_rows, work_dir=args.work_dir)
    rejected = sum(m.rejections.values())
    if rejected:
        log.warning("%d rows rejected; see %s", rejected, Path(args.output) / "rejections.log")
    print(f"trips={m.trips} events={sum(m.events.values())} rejected={rejected} wall={m.wall_time_s}s")
    return EXIT_OK


def cmd_stats(args) -> int:
    directory = Path(args.events)
    if not directory.is_dir():
        raise UsageError(f"events directory {directory} not found")
    scenarios = parse_scenarios(args.scenario)
    counts = tables.scenario_counts(directory, scenarios)
    if not counts:
        raise UsageError(f"no event tables in {directory}")
    print("Scenario,TotalEvents")
    for name, n in counts:
        print(f"{name},{n}")
    print(f"Sum,{sum(n for _, n in counts)}")
    return EXIT_OK


def start_positions(events_dir, scenarios) -> dict:
    """(scenario, key, event_id) -> WSU position at the event's start tick,
    read from the sequence tables."""
    wanted = {}
    for s in scenarios:
        for e in tables.read_events(events_dir, s):
            wanted[(s, e.key, e.event_id)] = e.start_tick
    out = {}
    for s in scenarios:
        for row in tables.iter_sequence(events_dir, s):
            k = (s, (int(row["Device"]), int(row["Trip"])), int(row["EventId"]))
            if k in out or wanted.get(k) != int(row["Time"]):
                continue
            lat, lon = row.get("Latitude", ""), row.get("Longitude", "")
            if lat and lon:
                out[k] = GeoPoint(float(lat), float(lon))
    return out


def cmd_geojson(args) -> int:
    if not Path(args.events).is_dir():
        raise UsageError(f"events directory {args.events} not found")
    scenarios = [s for s in parse_scenarios(args.scenario) if tables.event_path(args.events, s).exists()]
    events = tables.read_all_events(args.events, scenarios)
    doc, omitted = emit_geojson(events, start_positions(args.events, scenarios))
    text = json.dumps(doc, indent=None, separators=(",", ":")) + "\n"
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text, encoding="utf-8")
    log.info("%d features, %d events without GPS omitted", len(doc["features"]), omitted)
    print(f"features={len(doc['features'])} omitted={omitted}", file=sys.stderr)
    return EXIT_OK


def _specs_from(path, seed):
    from .synth.generate import TripSpec

    if path is None:
        specs = [TripSpec()]
    else:
        p = Path(path)
        if p.is_dir():
            files = sorted(p.glob("*.spec")) + sorted(p.glob("*.txt"))
            if not files:
                raise UsageError(f"no .spec files in {p}")
        elif p.is_file():
            files = [p]
        else:
            raise UsageError(f"spec path {p} not found")
        specs = [TripSpec.from_file(f) for f in files]
    if seed is not None:
        import dataclasses
        specs = [dataclasses.replace(s, seed=seed + i) for i, s in enumerate(specs)]
    return [one for s in specs for one in s.expand()]


def cmd_gen(args) -> int:
    from .synth.generate import InfeasibleSpec, random_spec, write_dataset

    try:
        if args.random is not None:
            base = args.seed or 0
            specs = [random_spec(base + i) for i in range(args.random)]
        else:
            specs = _specs_from(args.spec, args.seed)
        keys = [(s.device, s.trip) for s in specs]
        if len(set(keys)) != len(keys):
            raise UsageError("specs produce duplicate (device, trip) keys")
        totals = write_dataset(args.output, specs)
    except InfeasibleSpec as exc:
        raise UsageError(f"infeasible spec: {exc}")
    except (OSError, TypeError, ValueError) as exc:
        raise UsageError(f"bad spec: {exc}")
    print(" ".join(f"{k}={v}" for k, v in totals.items()))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .synth.compare import verify_directory, write_report_csv

    for d in (args.input, args.events):
        if not Path(d).is_dir():
            raise UsageError(f"directory {d} not found")
    cfg = load_config(args.config)
    try:
        reports = verify_directory(args.input, args.events, cfg, parse_scenarios(args.scenario))
    except FileNotFoundError as exc:
        raise UsageError(str(exc))
    for r in reports:
        print(r.text())
    if args.report:
        write_report_csv(args.report, reports)
    return EXIT_OK if all(r.ok for r in reports) else EXIT_DIFF


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scenariomine", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def scen(sp):
        sp.add_argument("--scenario", default="all",
                        help="all, or a comma list of: " + ", ".join(SCENARIO_CHOICES[1:]))

    e = sub.add_parser("extract", help="mine scenario tables from raw CSVs")
    e.add_argument("--input", required=True, help="directory with DataWsu.csv etc.")
    e.add_argument("--output", required=True)
    scen(e)
    e.add_argument("--config", help="key=value file overriding extraction parameters")
    e.add_argument("--jobs", type=int, default=default_jobs())
    e.add_argument("--spill-rows", type=int, default=250_000,
                   help="rows buffered per trip before spilling to disk")
    e.add_argument("--work-dir", help="scratch directory (default: system temp)")
    e.set_defaults(func=cmd_extract)

    s = sub.add_parser("stats", help="per-scenario event counts")
    s.add_argument("--events", "--input", dest="events", required=True)
    scen(s)
    s.set_defaults(func=cmd_stats)

    g = sub.add_parser("geojson", help="event start points as GeoJSON")
    g.add_argument("--events", "--input", dest="events", required=True)
    scen(g)
    g.add_argument("--output", help="file to write (default stdout)")
    g.set_defaults(func=cmd_geojson)

    n = sub.add_parser("gen", help="write a synthetic dataset with ground truth")
    n.add_argument("--spec", "--input", dest="spec", help="spec file or directory of *.spec files")
    n.add_argument("--output", required=True)
    n.add_argument("--seed", type=int, help="noise seed (added to per-spec index)")
    n.add_argument("--random", type=int, metavar="N", help="N randomized specs, seeds from --seed")
    n.set_defaults(func=cmd_gen)

    v = sub.add_parser("verify", help="compare extracted tables with ground truth and the oracle")
    v.add_argument("--input", required=True, help="raw dataset directory")
    v.add_argument("--events", "--output", dest="events", required=True, help="extracted tables")
    scen(v)
    v.add_argument("--config")
    v.add_argument("--report", help="write a CSV diff report here")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    level = os.environ.get("TRAFFICNET_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, MissingTableError, SchemaError, GeoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STRUCTURAL
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STRUCTURAL


if __name__ == "__main__":
    sys.exit(main())
