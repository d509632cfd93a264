"""Precision and cost metrics for every corpus program under several modes.

Prints one CSV row per (program, mode) plus per-mode totals.

    python3 scripts/metrics_table.py [--modes ...] [--skip permutation5]
"""

import argparse
import csv
import sys
from collections import defaultdict

from hybridpta.cli import ALL_MODES, run_mode
from hybridpta.corpus import load_corpus

FIELDS = ["program", "mode", "reach", "poly", "C", "C_prop", "pct_C_prop",
          "K_max", "K_avg", "time_ms"]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--modes", default=",".join(ALL_MODES))
    ap.add_argument("--skip", default="", help="comma-separated program names to skip")
    args = ap.parse_args()
    skip = set(filter(None, args.skip.split(",")))
    w = csv.DictWriter(sys.stdout, FIELDS, extrasaction="ignore")
    w.writeheader()
    totals = defaultdict(lambda: defaultdict(float))
    for e in load_corpus():
        if e.name in skip:
            continue
        for mode in args.modes.split(","):
            run = run_mode(e.program, mode, {})
            row = run.metrics.row()
            w.writerow({"program": f"{e.category}/{e.name}", **row})
            for k in ("poly", "reach", "time_ms"):
                totals[row["mode"]][k] += row[k]
    print()
    for mode, t in totals.items():
        print(f"# {mode}: poly={t['poly']:.0f} reach={t['reach']:.0f} time={t['time_ms']:.0f}ms")


if __name__ == "__main__":
    main()
