"""Differential check of HIA against the unbounded-context oracle.

Generates programs for seeds ``[start, start+n)`` and reports every seed
where HIA's root facts differ from the oracle's, or where a k-limited mode
drops an oracle fact.

    python3 scripts/oracle_sweep.py --n 1000 --start 0
"""

import argparse
import time

from hybridpta.corpus import GenParams, generate
from hybridpta.driver import analyze
from hybridpta.inline import Config
from hybridpta.oracle import cover_violations, fact_divergences, inline_exact
from hybridpta.summarize import ProgramInfo


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--start", type=int, default=0)
    ap.add_argument("--procs", type=int, default=10)
    ap.add_argument("--depth", type=int, default=4)
    ap.add_argument("--modes", default="comci,hi:1,hi:2,hi:3")
    args = ap.parse_args()
    t0 = time.perf_counter()
    bad = 0
    for seed in range(args.start, args.start + args.n):
        gp = GenParams(max_procs=args.procs, max_depth=args.depth,
                       root_params=seed % 3, roots=1 + (seed // 3) % 2)
        p = generate(seed, gp)
        info = ProgramInfo(p)
        oracle = inline_exact(p, info=info).facts
        div = fact_divergences(analyze(p, Config.from_mode("hia"), info).facts(), oracle)
        if div:
            bad += 1
            print(f"seed {seed}: HIA diverges on {len(div)} fact(s), first {div[0]}")
        for m in args.modes.split(","):
            v = cover_violations(analyze(p, Config.from_mode(m), info).facts(), oracle)
            if v:
                bad += 1
                print(f"seed {seed}: {m} misses {len(v)} oracle fact(s), first {v[0]}")
    print(f"{args.n} seeds, {bad} problem(s), {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
