#!/usr/bin/env python3
"""Write the randomized closed-loop corpus (one trip per seed) with ground truth.

    python3 scripts/make_corpus.py --output corpus/raw --seeds 0-99
"""
import argparse
import sys
from collections import Counter

from scenariomine.synth.generate import random_spec, read_truth, write_dataset


def seed_range(text):
    lo, _, hi = text.partition("-")
    return range(int(lo), int(hi or lo) + 1)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output", required=True)
    ap.add_argument("--seeds", type=seed_range, default=seed_range("0-99"))
    ap.add_argument("--write-specs", action="store_true", help="also save each spec as <seed>.spec")
    args = ap.parse_args(argv)
    specs = [random_spec(s) for s in args.seeds]
    totals = write_dataset(args.output, specs)
    if args.write_specs:
        from pathlib import Path
        d = Path(args.output) / "specs"
        d.mkdir(exist_ok=True)
        for s in specs:
            (d / f"{s.seed:04d}.spec").write_text(s.to_text(), encoding="utf-8")
    kinds = Counter(e.scenario.title for e in read_truth(f"{args.output}/ground_truth.csv"))
    print(" ".join(f"{k}={v}" for k, v in totals.items()))
    print(" ".join(f"{k}={v}" for k, v in sorted(kinds.items())))
    return 0


if __name__ == "__main__":
    sys.exit(main())
