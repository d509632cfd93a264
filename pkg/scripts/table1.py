"""Precision marks per corpus category, one column per analysis.

The ComCI and HI3 columns are compared with the published marks; a trailing
``*`` flags a difference.  Port-adjusted rows are shown but not compared.

    python3 scripts/table1.py [--modes topci,inline:3,comci,hi:3,hia]
"""

import argparse

from hybridpta.cli import corpus_marks
from hybridpta.corpus import PORT_ADJUSTED, TABLE1_MARKS, load_corpus

PUBLISHED = {"comci": "ComCI", "hi:3": "HI3"}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--modes", default="topci,inline:3,comci,hi:3,hia")
    args = ap.parse_args()
    modes = args.modes.split(",")
    entries = [e for e in load_corpus() if e.category in TABLE1_MARKS]
    cols = {m: corpus_marks(entries, m) for m in modes}
    print(f"{'category':20s}" + "".join(f"{m:>12s}" for m in modes))
    diffs = 0
    for cat in TABLE1_MARKS:
        cells = []
        for m in modes:
            got = cols[m].get(cat, "-")
            col = PUBLISHED.get(m)
            flag = col and cat not in PORT_ADJUSTED and got != TABLE1_MARKS[cat][col]
            diffs += bool(flag)
            cells.append(f"{got + ('*' if flag else ''):>12s}")
        tag = "  (port-adjusted)" if cat in PORT_ADJUSTED else ""
        print(f"{cat:20s}" + "".join(cells) + tag)
    print(f"\n{diffs} difference(s) from the published ComCI/HI3 columns")


if __name__ == "__main__":
    main()
