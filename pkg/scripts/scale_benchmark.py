#!/usr/bin/env python3
"""Extract a >= 10^7-row synthetic input and report wall time and peak memory.

Peak memory is the maximum, over 50 ms samples, of the summed RSS of the
extract process and all of its worker processes.

    python3 scripts/scale_benchmark.py --work /tmp/scale --rows 10000000 --jobs 4
"""
import argparse
import json
import os
import subprocess
import sys
import threading
import time
from pathlib import Path

import psutil


def tree_rss(proc: psutil.Process) -> int:
    total = 0
    for p in [proc] + proc.children(recursive=True):
        try:
            total += p.memory_info().rss
        except (psutil.NoSuchProcess, psutil.AccessDenied):
            pass
    return total


def run_measured(cmd, interval=0.05) -> dict:
    """Run ``cmd``; return exit code, wall seconds and peak tree RSS in bytes."""
    t0 = time.perf_counter()
    child = subprocess.Popen(cmd, stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
    proc = psutil.Process(child.pid)
    peak = 0
    done = threading.Event()

    def sample():
        nonlocal peak
        while not done.is_set():
            try:
                peak = max(peak, tree_rss(proc))
            except psutil.NoSuchProcess:
                return
            done.wait(interval)

    th = threading.Thread(target=sample, daemon=True)
    th.start()
    out, _ = child.communicate()
    done.set()
    th.join()
    return {"returncode": child.returncode, "wall_s": time.perf_counter() - t0,
            "peak_rss_bytes": peak, "output": out}


def ensure_dataset(raw: Path, rows: int) -> dict:
    from scenariomine.synth.generate import scale_specs, write_dataset

    marker = raw / "totals.json"
    if marker.exists():
        totals = json.loads(marker.read_text())
        if totals.get("requested", 0) >= rows:
            return totals
    totals = write_dataset(raw, scale_specs(rows))
    totals["requested"] = rows
    marker.write_text(json.dumps(totals))
    return totals


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--work", default="/tmp/scenariomine-scale")
    ap.add_argument("--rows", type=int, default=10_000_000)
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args(argv)
    work = Path(args.work)
    raw, out = work / "raw", work / "out"
    t = time.perf_counter()
    totals = ensure_dataset(raw, args.rows)
    print(f"dataset: {totals['rows']} rows in {totals['trips']} trips ({time.perf_counter() - t:.1f}s)")
    res = run_measured([sys.executable, "-m", "scenariomine.cli", "extract", "--input", str(raw),
                        "--output", str(out), "--jobs", str(args.jobs), "--work-dir", str(work)])
    print(res["output"].strip())
    print(f"extract: exit={res['returncode']} wall={res['wall_s']:.1f}s "
          f"peak_rss={res['peak_rss_bytes'] / 2**20:.0f} MiB jobs={args.jobs}")
    return res["returncode"]


if __name__ == "__main__":
    sys.exit(main())
