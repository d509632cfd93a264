"""Whole-program orchestration.

Summaries are computed on demand, depth first from the roots.  A stack of
frames tracks the procedures currently being summarized; it drives
recursion unrolling and the permutation guard, and decides whether a
finished summary may be published to the cache.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from . import ir
from .heapstate import AccessPath, AllocSite, Local, Ret, Solution
from .inline import BASE, TRUNCATED, Config, Workspace
from .summarize import HybridSummary, ProgramInfo, summarize_proc

__all__ = [
    "Frame", "Metrics", "AnalysisResult", "FuelExhausted", "Analyzer",
    "analyze", "root_facts", "recursion_unroll", "permutation_guard",
]


class FuelExhausted(RuntimeError):
    pass


@dataclass
class Frame:
    proc: str
    witness: str | None = None   # method dispatched to > m targets on entry
    min_dep: float = math.inf


@dataclass
class Metrics:
    mode: str = ""
    reached_procs: int = 0
    poly_callsites: int = 0
    virtual_callsites: int = 0
    critical_total: int = 0
    critical_propagated: int = 0
    total_statements: int = 0
    k_max: int = 0
    k_avg: float = 0.0
    runtime_ms: float = 0.0

    @property
    def prop_ratio(self) -> float:
        return self.critical_propagated / self.total_statements if self.total_statements else 0.0

    def consistent(self) -> bool:
        return (self.critical_propagated <= self.critical_total
                and self.k_avg <= self.k_max
                and (self.k_max == 0) == (self.critical_propagated == 0)
                and self.poly_callsites <= self.virtual_callsites)

    def row(self) -> dict:
        return {
            "mode": self.mode, "reach": self.reached_procs, "poly": self.poly_callsites,
            "C": self.critical_total, "C_prop": self.critical_propagated,
            "pct_C_prop": round(100 * self.prop_ratio, 2), "K_max": self.k_max,
            "K_avg": round(self.k_avg, 2), "time_ms": round(self.runtime_ms, 1),
        }


@dataclass
class AnalysisResult:
    program: ir.Program
    config: Config
    summaries: dict
    root_states: dict
    root_workspaces: dict
    metrics: Metrics
    diagnostics: list = field(default_factory=list)
    computed: list = field(default_factory=list)

    def facts(self) -> dict:
        out = {}
        for r, sol in self.root_states.items():
            out.update(root_facts(self.program, r, sol))
        return out

    def call_edges(self) -> set:
        """Collapsed (site, target) pairs."""
        edges = set()
        for ev in self._all_events():
            edges.add((ev.site, ev.target))
        return edges

    def _all_events(self):
        seen = set()
        todo = [ws.events for ws in self.root_workspaces.values()]
        todo += [s.events for s in self.computed]
        while todo:
            evs = todo.pop()
            for ev in evs:
                yield ev
                if ev.child is not None and id(ev.child) not in seen:
                    seen.add(id(ev.child))
                    todo.append(ev.child.events)

    def call_strings(self, root: str, limit: int = 100000) -> set:
        """Procedure chains from ``root`` down to every resolved target."""
        out: set = set()

        def expand(events, chain):
            for ev in events:
                if len(out) >= limit:
                    return
                procs = chain + tuple(t for _, t in ev.ctx) + (ev.target,)
                out.add(procs)
                if ev.child is not None:
                    expand(ev.child.events, procs)

        expand(self.root_workspaces[root].events, (root,))
        return out


def root_facts(program: ir.Program, root: str, sol: Solution) -> dict:
    """Points-to sets of every variable of a root plus its return slot."""
    proc = program.procs[root]
    out = {}
    for v in sorted(set(proc.params) | proc.locals()):
        out[(root, v)] = sol.pt(AccessPath(Local(v, root)))
    out[(root, ir.RET)] = sol.pt(AccessPath(Ret(root)))
    return out


def recursion_unroll(stack: list, callee: str, unroll: int) -> str:
    """``inline`` (plain or cached), ``copy`` (fresh unrolled copy) or ``base``."""
    count = sum(1 for f in stack if f.proc == callee)
    if count >= unroll:
        return "base"
    return "copy" if count else "inline"


def permutation_guard(stack: list, method: str | None, width: int, bound: int) -> int | None:
    """Index of an earlier frame that already dispatched ``method`` to more
    than ``bound`` targets, or None when descending is allowed."""
    if method is None or width <= bound:
        return None
    for j, f in enumerate(stack):
        if f.witness == method:
            return j
    return None


class Analyzer:
    def __init__(self, program: ir.Program, config: Config, info: ProgramInfo | None = None):
        self.program = program
        self.config = config
        self.info = info or ProgramInfo(program)
        self.cache: dict[str, HybridSummary] = {}
        self.stack: list[Frame] = []
        self.computed: list[HybridSummary] = []
        self.fuel_used = 0
        self.passes: dict[str, int] = {}
        self.truncations = 0
        self._density = self._critical_density()

    def _critical_density(self) -> dict:
        per_proc = {pid: sum(ls.critical for ls in body) for pid, body in self.info.bodies.items()}
        out: dict[str, int] = {}
        for c in self.program.classes:
            total = sum(per_proc.get(pid, 0) for _, pid in c.methods)
            for _, pid in c.methods:
                out[pid] = max(out.get(pid, 0), total)
        return out

    # resolver protocol used by Workspace

    def critical_density(self, pid: str) -> int:
        return self._density.get(pid, 0)

    def tick(self, n: int = 1) -> None:
        self.fuel_used += n
        if self.fuel_used > self.config.fuel:
            raise FuelExhausted(f"fuel {self.config.fuel} exhausted")

    def _hit(self, j: int) -> None:
        if self.stack:
            top = self.stack[-1]
            top.min_dep = min(top.min_dep, j)

    def summary(self, pid: str, method: str | None = None, width: int = 0):
        plan = recursion_unroll(self.stack, pid, self.config.unroll)
        if plan == "base":
            self._hit(next(j for j, f in enumerate(self.stack) if f.proc == pid))
            return BASE
        if self.config.opt3:
            j = permutation_guard(self.stack, method, width, self.config.dispatch_bound)
            if j is not None:
                self._hit(j)
                self.truncations += 1
                return TRUNCATED
        if plan == "inline" and pid in self.cache:
            return self.cache[pid]
        if plan == "copy":
            self._hit(next(j for j, f in enumerate(self.stack) if f.proc == pid))
        witness = method if (method is not None and width > self.config.dispatch_bound) else None
        return self._compute(pid, witness)

    def _compute(self, pid: str, witness=None) -> HybridSummary:
        idx = len(self.stack)
        frame = Frame(pid, witness)
        self.stack.append(frame)
        self.tick()
        self.passes[pid] = self.passes.get(pid, 0) + 1
        try:
            summ = summarize_proc(self.program.procs[pid], self.info, self.config, self)
        finally:
            self.stack.pop()
        if frame.min_dep < math.inf:
            self._hit(frame.min_dep)
        if frame.min_dep >= idx:
            self.cache.setdefault(pid, summ)
        self.computed.append(summ)
        return summ

    def run_root(self, root: str) -> Workspace:
        self.stack.append(Frame(root))
        try:
            ws = Workspace(root, self.info, self.config, self)
            ws.load_body()
            ws.ready_sweep()
            ws.apply_at_root()
        finally:
            self.stack.pop()
        return ws


def analyze(program: ir.Program, config: Config | None = None,
            info: ProgramInfo | None = None) -> AnalysisResult:
    """Summarize reachable procedures and apply root summaries."""
    config = config or Config()
    t0 = time.perf_counter()
    an = Analyzer(program, config, info)
    workspaces = {}
    for r in program.roots:
        workspaces[r] = an.run_root(r)
    if config.all_procs:
        for pid in sorted(program.procs):
            an.summary(pid)
    elapsed = (time.perf_counter() - t0) * 1000
    states = {r: ws.sol for r, ws in workspaces.items()}
    result = AnalysisResult(program, config, dict(an.cache), states, workspaces,
                            Metrics(), computed=list(an.computed))
    result.metrics = _metrics(result, an, elapsed)
    diags = []
    for s in an.computed:
        diags.extend(s.diagnostics)
        if s.stats.widenings:
            diags.append(f"warning: {s.stats.widenings} path widening(s) in {s.owner}")
    for ws in workspaces.values():
        diags.extend(ws.diagnostics)
    result.diagnostics = sorted(set(diags))
    return result


def _metrics(result: AnalysisResult, an: Analyzer, elapsed: float) -> Metrics:
    reached = set(result.program.roots)
    resolutions = []
    for ws in result.root_workspaces.values():
        resolutions.extend(ws.resolutions)
    seen = set()
    todo = [ws.events for ws in result.root_workspaces.values()]
    while todo:
        for ev in todo.pop():
            reached.add(ev.target)
            if ev.child is not None and id(ev.child) not in seen:
                seen.add(id(ev.child))
                resolutions.extend(ev.child.resolutions)
                todo.append(ev.child.events)
    if result.config.all_procs:
        reached |= set(result.program.procs)
        for s in result.computed:
            if id(s) not in seen:
                seen.add(id(s))
                resolutions.extend(s.resolutions)
    info = an.info
    total = crit = virt = 0
    for pid in reached:
        for ls in info.bodies[pid]:
            total += 1
            crit += ls.critical
            virt += isinstance(ls.stmt, ir.Call) and ls.stmt.is_virtual and ls.critical
    poly = {r.site for r in resolutions if r.targets > 1}
    steps: dict = {}
    for r in resolutions:
        if r.steps >= 1:
            steps[(r.owner, r.site)] = max(steps.get((r.owner, r.site), 0), r.steps)
    m = Metrics(
        mode=result.config.label, reached_procs=len(reached), poly_callsites=len(poly),
        virtual_callsites=virt, critical_total=crit, critical_propagated=len(steps),
        total_statements=total, k_max=max(steps.values(), default=0),
        k_avg=(sum(steps.values()) / len(steps)) if steps else 0.0, runtime_ms=elapsed,
    )
    return m


def unique_instance(sol: Solution, site: AllocSite) -> bool:
    """Is ``site`` the only instance of its label in the solved state."""
    label = site.label
    found = set()
    for vals in sol.pts.values():
        for v in vals:
            if isinstance(v, AllocSite) and v.label == label:
                found.add(v)
    return len(found) <= 1
