#!/usr/bin/env python3
"""gen -> extract -> verify on the randomized corpus, timed, with a diff report.

    python3 scripts/closed_loop.py --work /tmp/closed-loop --trips 100 --jobs 4
"""
import argparse
import sys
import time
from pathlib import Path

from scenariomine.cli import main as cli


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--work", default="/tmp/scenariomine-closed-loop")
    ap.add_argument("--trips", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args(argv)
    work = Path(args.work)
    raw, out = work / "raw", work / "out"
    t0 = time.perf_counter()
    steps = [
        ["gen", "--output", str(raw), "--random", str(args.trips), "--seed", str(args.seed)],
        ["extract", "--input", str(raw), "--output", str(out), "--jobs", str(args.jobs)],
        ["verify", "--input", str(raw), "--events", str(out), "--report", str(work / "diff.csv")],
    ]
    for step in steps:
        t = time.perf_counter()
        code = cli(step)
        print(f"-- {step[0]}: exit {code} ({time.perf_counter() - t:.1f}s)")
        if code:
            return code
    print(f"closed loop ok in {time.perf_counter() - t0:.1f}s; report {work / 'diff.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
