"""Command-line frontend.

    hybridpta analyze FILE|DIR... [--mode M] [--assert] [--check-oracle K] ...
    hybridpta gen --seed S

Exit codes: 0 ok, 1 internal error, 2 parse or configuration error,
3 assertion mismatch, 4 oracle divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import ir
from .corpus import GenParams, generate, has_cycle
from .driver import Metrics, analyze, root_facts, unique_instance
from .heapstate import TOP, AllocSite, Solution
from .inline import Config
from .oracle import (
    OutOfScope, cover_violations, fact_divergences, kcfa, truncate_facts,
)
from .summarize import ProgramInfo

EXIT_OK, EXIT_INTERNAL, EXIT_PARSE, EXIT_ASSERT, EXIT_ORACLE = 0, 1, 2, 3, 4

ALL_MODES = ("topci", "inline:3", "comci", "hi:3", "hia")


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------- assertions


def may_alias(a: frozenset, b: frozenset) -> bool:
    if not a or not b:
        return False
    return TOP in a or TOP in b or bool(a & b)


def assert_eval(sol: Solution, program: ir.Program, assertion: ir.AliasAssertion) -> str:
    """``pass``, ``fail`` or ``indeterminate`` for one assertion."""
    if assertion.proc not in program.roots:
        raise ConfigError(f"assertion scope {assertion.proc!r} is not a root")
    facts = root_facts(program, assertion.proc, sol)
    a, b = (facts.get((assertion.proc, v)) for v in assertion.vars)
    if a is None or b is None:
        raise ConfigError(f"unknown variable in {assertion}")
    if assertion.kind == "noalias":
        return "fail" if may_alias(a, b) else "pass"
    if not may_alias(a, b):
        return "fail"
    if a == b and len(a) == 1:
        (v,) = a
        if isinstance(v, AllocSite) and unique_instance(sol, v):
            return "pass"
    return "indeterminate"


def mark(sol: Solution, program: ir.Program, assertion: ir.AliasAssertion) -> str:
    """Precision mark of one query.

    An alias query asks whether the pair may alias: ``tp`` when a true alias
    is reported, ``fp`` when a false one is.  A noalias query asks for a
    proof of disjointness: ``tp`` when a true one is verified, ``fp`` when
    it is not.  ``miss`` flags an unsound answer, ``""`` a silent one.
    """
    facts = root_facts(program, assertion.proc, sol)
    reported = may_alias(*(facts[(assertion.proc, v)] for v in assertion.vars))
    truth = assertion.truly_aliased
    if assertion.kind == "alias":
        if truth:
            return "tp" if reported else "miss"
        return "fp" if reported else ""
    if truth:
        return "" if reported else "miss"
    return "fp" if reported else "tp"


def mark_string(marks) -> str:
    tp, fp = sum(m == "tp" for m in marks), sum(m == "fp" for m in marks)
    parts = [f"{tp}✓"] if tp else []
    if fp:
        parts.append(f"{fp}⊗")
    return ",".join(parts) or "-"


def corpus_marks(entries, mode: str, opts: dict | None = None) -> dict:
    """Mark string per corpus category for one mode."""
    out: dict = {}
    for e in entries:
        run = run_mode(e.program, mode, opts or {})
        ms = [mark(run.states[a.proc], e.program, a) for a in e.program.assertions]
        out.setdefault(e.category, []).extend(ms)
    return {cat: mark_string(ms) for cat, ms in out.items()}


def matches(outcome: str, expected: str) -> bool:
    return (outcome == "pass") == (expected == "pass")


# ------------------------------------------------------------------ modes


@dataclass
class ModeRun:
    """Uniform view over a compositional or a top-down run."""

    mode: str
    states: dict
    facts: dict
    edges: set
    metrics: Metrics
    diagnostics: list = field(default_factory=list)
    summaries: dict = field(default_factory=dict)
    k: int | None = None   # allocation-context length for oracle comparisons


def parse_k(text: str) -> int | None:
    if text in ("inf", "∞"):
        return None
    try:
        k = int(text)
    except ValueError:
        raise ConfigError(f"bad context bound {text!r}") from None
    if k < 0:
        raise ConfigError("context bound must be >= 0")
    return k


def run_mode(program: ir.Program, mode: str, opts: dict, info: ProgramInfo | None = None) -> ModeRun:
    info = info or ProgramInfo(program)
    mode = mode.lower()
    t0 = time.perf_counter()
    if mode == "topci" or mode.startswith("inline:"):
        k = 0 if mode == "topci" else parse_k(mode.split(":", 1)[1])
        o = kcfa(program, k, unroll=opts.get("unroll", 2), depth=opts.get("depth", 6),
                 info=info, shared=(mode == "topci"))
        ms = (time.perf_counter() - t0) * 1000
        label = "TopCI" if mode == "topci" else f"{'inf' if k is None else k}C"
        body = [ls for pid in o.reached for ls in info.bodies[pid]]
        m = Metrics(mode=label, reached_procs=len(o.reached), poly_callsites=len(o.poly),
                    critical_total=sum(ls.critical for ls in body),
                    virtual_callsites=sum(ls.critical and isinstance(ls.stmt, ir.Call)
                                          for ls in body),
                    total_statements=len(body), runtime_ms=ms)
        return ModeRun(label, o.states, o.facts, o.edges, m, k=k)
    try:
        config = Config.from_mode(mode, **opts)
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from None
    res = analyze(program, config, info)
    return ModeRun(config.label, res.root_states, res.facts(), res.call_edges(),
                   res.metrics, res.diagnostics, res.summaries)


# ------------------------------------------------------------ per file


def _fmt_set(vals) -> str:
    return "{" + ", ".join(sorted(map(str, vals))) + "}"


def check_oracle(program: ir.Program, run: ModeRun, k: int | None, opts: dict,
                 info: ProgramInfo) -> tuple[list, str]:
    """Divergence list and a description of the relation that was checked."""
    o = kcfa(program, k, unroll=opts.get("unroll", 2), depth=opts.get("depth", 6), info=info)
    exact = run.mode == "HIA" and not has_cycle(program)
    if k is None:
        if exact:
            return fact_divergences(run.facts, o.facts), "equal"
        return cover_violations(run.facts, truncate_facts(o.facts, run.k)), "covers"
    if not exact:
        return [], "not comparable"
    return cover_violations(o.facts, truncate_facts(run.facts, k)), "within"


def process_file(path: str, modes: list, opts: dict, flags: dict) -> dict:
    out = {"path": path, "lines": [], "records": [], "rows": [], "edges": [], "code": EXIT_OK}
    lines = out["lines"]
    try:
        program = ir.parse(Path(path).read_text())
    except (ir.IRError, OSError) as e:
        lines.append(f"error: {path}: {e}")
        out["code"] = EXIT_PARSE
        return out
    info = ProgramInfo(program)
    codes = []
    for mode in modes:
        try:
            run = run_mode(program, mode, opts, info)
        except ConfigError as e:
            lines.append(f"error: {e}")
            out["code"] = EXIT_PARSE
            return out
        except OutOfScope as e:
            lines.append(f"== {path} [{mode}] skipped: {e}")
            continue
        lines.append(f"== {path} [{run.mode}]")
        for d in run.diagnostics:
            lines.append(f"  {d}")
        for (scope, var), vals in sorted(run.facts.items(), key=lambda kv: str(kv[0])):
            lines.append(f"  pt {scope}.{var} = {_fmt_set(vals)}")
            for v in sorted(map(str, vals)):
                out["records"].append({"kind": "pt", "file": path, "mode": run.mode,
                                       "scope": scope, "path": var, "target": v})
        for site, target in sorted(run.edges):
            out["edges"].append((path, run.mode, site, target))
            out["records"].append({"kind": "edge", "file": path, "mode": run.mode,
                                   "callsite": site, "target": target})
        if flags.get("dump_summaries"):
            for pid in sorted(run.summaries):
                lines += ["  " + ln for ln in run.summaries[pid].dump().splitlines()]
        if flags.get("assert"):
            marks = []
            for a in program.assertions:
                sol = run.states[a.proc]
                try:
                    outcome = assert_eval(sol, program, a)
                except ConfigError as e:
                    lines.append(f"error: {e}")
                    out["code"] = EXIT_PARSE
                    return out
                mk = mark(sol, program, a)
                marks.append(mk)
                ok = matches(outcome, a.expected)
                lines.append(f"  assert {a.kind} {a.proc}.{a.vars[0]}, {a.proc}.{a.vars[1]}"
                             f" expect {a.expected}: {outcome}{'' if ok else ' MISMATCH'}"
                             f"{' [' + mk + ']' if mk else ''}")
                if mk == "miss" or (flags.get("strict") and not ok):
                    codes.append(EXIT_ASSERT)
            lines.append(f"  marks {mark_string(marks)}")
        if "check_oracle" in flags:
            k = flags["check_oracle"]
            try:
                div, rel = check_oracle(program, run, k, opts, info)
            except OutOfScope as e:
                lines.append(f"  oracle skipped: {e}")
            else:
                kname = "inf" if k is None else k
                lines.append(f"  oracle {kname}C ({rel}): {len(div)} divergence(s)")
                for d in div[:20]:
                    lines.append(f"    {d}")
                if div:
                    codes.append(EXIT_ORACLE)
        row = {"file": path, **run.metrics.row()}
        out["rows"].append(row)
        lines.append("  metrics " + " ".join(f"{k}={v}" for k, v in row.items() if k != "file"))
    if codes:
        out["code"] = max(codes)
    return out


def _worker(job):
    path, modes, opts, flags = job
    try:
        return process_file(path, modes, opts, flags)
    except Exception as e:  # noqa: BLE001 - reported as an internal error
        return {"path": path, "lines": [f"internal error: {path}: {e!r}"], "records": [],
                "rows": [], "edges": [], "code": EXIT_INTERNAL}


# -------------------------------------------------------------------- main


def _expand_inputs(inputs) -> list[str]:
    files = []
    for p in map(Path, inputs):
        files += sorted(map(str, p.rglob("*.hir"))) if p.is_dir() else [str(p)]
    return files


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridpta", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    a = sub.add_parser("analyze", help="analyze IR files or directories")
    a.add_argument("inputs", nargs="+")
    a.add_argument("--mode", default="hia",
                   help="comci | hi:<k> | hia | topci | inline:<k|inf> | all")
    a.add_argument("--assert", dest="check_assert", action="store_true",
                   help="evaluate alias assertions")
    a.add_argument("--strict", action="store_true",
                   help="fail on any assertion outcome that differs from its annotation")
    a.add_argument("--check-oracle", metavar="K", help="compare against k-CFA (k or inf)")
    a.add_argument("--metrics", metavar="PATH", help="write metrics rows as CSV")
    a.add_argument("--callgraph", metavar="PATH", help="write call edges")
    a.add_argument("--json", metavar="PATH", help="write facts and edges as JSON records")
    a.add_argument("--dump-summaries", action="store_true")
    a.add_argument("--depth-bound", type=int, default=6)
    a.add_argument("--unroll", type=int, default=2)
    a.add_argument("--dispatch-bound", type=int, default=5)
    a.add_argument("--pending-cap", type=int, default=64)
    a.add_argument("--jobs", type=int, default=1, help="files analyzed in parallel")
    a.add_argument("--all-procs", action="store_true",
                   help="also summarize procedures unreachable from roots")
    a.add_argument("--quiet", action="store_true", help="suppress points-to lines")

    g = sub.add_parser("gen", help="print a random program")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--procs", type=int, default=GenParams.max_procs)
    g.add_argument("--depth", type=int, default=GenParams.max_depth)
    g.add_argument("--width", type=int, default=GenParams.width)
    g.add_argument("--root-params", type=int, default=0)
    return ap


def _gen(args) -> int:
    seed = args.seed if args.seed is not None else int(os.environ.get("HI_SEED", "0"))
    try:
        params = GenParams(max_procs=args.procs, max_depth=args.depth, width=args.width,
                           root_params=args.root_params)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    sys.stdout.write(ir.pretty(generate(seed, params)))
    return EXIT_OK


def _analyze(args) -> int:
    modes = list(ALL_MODES) if args.mode.lower() == "all" else [args.mode]
    opts = {"depth": args.depth_bound, "unroll": args.unroll,
            "dispatch_bound": args.dispatch_bound, "pending_cap": args.pending_cap,
            "all_procs": args.all_procs}
    flags = {"assert": args.check_assert, "strict": args.strict,
             "dump_summaries": args.dump_summaries}
    try:
        if args.check_oracle is not None:
            flags["check_oracle"] = parse_k(args.check_oracle)
        Config(depth=args.depth_bound, unroll=args.unroll, dispatch_bound=args.dispatch_bound,
               pending_cap=args.pending_cap)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    files = _expand_inputs(args.inputs)
    if not files:
        print("error: no input files", file=sys.stderr)
        return EXIT_PARSE
    jobs = [(f, modes, opts, flags) for f in files]
    if args.jobs > 1 and len(files) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_worker, jobs))
    else:
        results = [_worker(j) for j in jobs]

    rows, records, edges, code = [], [], [], EXIT_OK
    for r in results:
        for ln in r["lines"]:
            if args.quiet and ln.startswith("  pt "):
                continue
            print(ln)
        rows += r["rows"]
        records += r["records"]
        edges += r["edges"]
        code = max(code, r["code"])
    if args.metrics:
        with open(args.metrics, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["file"])
            w.writeheader()
            w.writerows(rows)
    if args.callgraph:
        with open(args.callgraph, "w") as fh:
            for f, mode, site, target in edges:
                fh.write(f"{f}\t{mode}\t{site}\t{target}\n")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(records, fh, indent=1, sort_keys=True, ensure_ascii=False)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _gen(args) if args.cmd == "gen" else _analyze(args)
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {e!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
