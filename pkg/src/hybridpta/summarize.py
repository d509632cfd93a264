"""Per-procedure summarization: eval/cons rules, critical statements and
hybrid summaries.

A hybrid summary pairs a cleaned constraint delta with the critical
statements whose precise transfer still needs calling context.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Iterable

from . import ir
from .heapstate import (
    PI, AccessPath, AllocSite, ConstVal, Constraint, FieldOff, GLOBAL_ROOT,
    IndexOff, Local, Param, Ret, make_constraint,
)

__all__ = [
    "LoweredStmt", "ProgramInfo", "CriticalStatement", "HybridSummary",
    "SummaryStats", "Resolution", "CallEvent", "eval_lv", "cons_stmt",
    "is_critical", "join", "var_root", "summarize_proc",
]


# ---------------------------------------------------------------- lowering


def _digest(text: str) -> str:
    return hashlib.sha1(text.encode()).hexdigest()[:8]


@dataclass(frozen=True)
class LoweredStmt:
    site: str
    stmt: object
    critical: bool

    @property
    def is_call(self) -> bool:
        return isinstance(self.stmt, ir.Call)


class ProgramInfo:
    """Lowered bodies, site ids and critical flags, shared by all engines.

    Variable-indexed call arguments and results are moved into temporaries
    so calls only ever bind plain access paths.  Site ids hash the
    statement text, so they do not depend on body order.
    """

    def __init__(self, program: ir.Program):
        self.program = program
        self.bodies: dict[str, tuple] = {}
        self.site_owner: dict[str, str] = {}
        for pid, proc in program.procs.items():
            self.bodies[pid] = self._lower(proc)

    def _lower(self, proc: ir.Procedure) -> tuple:
        out: dict[str, LoweredStmt] = {}

        def emit(stmt) -> None:
            site = f"{proc.id}.{_digest(str(stmt))}"
            out[site] = LoweredStmt(site, stmt, is_critical(stmt, self.program))
            self.site_owner[site] = proc.id

        for s in proc.body:
            if isinstance(s, ir.Call):
                tag = _digest(str(s))
                args = []
                for i, a in enumerate(s.args):
                    if a.has_var_index:
                        t = ir.LValue(f"$t{tag}_{i}")
                        emit(ir.Assign(t, a))
                        args.append(t)
                    else:
                        args.append(a)
                result = s.result
                if result is not None and result.has_var_index:
                    t = ir.LValue(f"$t{tag}_r")
                    emit(ir.Assign(result, t))
                    result = t
                emit(ir.Call(result, s.callee, tuple(args), s.kind))
            else:
                emit(s)
        return tuple(out[k] for k in sorted(out))

    def params(self, pid: str) -> tuple:
        return self.program.procs[pid].params

    def impls(self, method: str) -> frozenset:
        return ir.implementations(self.program, method)


def is_critical(stmt, program: ir.Program) -> bool:
    """Variable-indexed accesses and polymorphic virtual calls."""
    if isinstance(stmt, ir.Assign):
        if stmt.lhs.has_var_index:
            return True
        return isinstance(stmt.rhs, ir.LValue) and stmt.rhs.has_var_index
    if isinstance(stmt, ir.Call):
        if any(a.has_var_index for a in stmt.args):
            return True
        if stmt.result is not None and stmt.result.has_var_index:
            return True
        return stmt.is_virtual and len(ir.implementations(program, stmt.callee)) > 1
    return False


# ----------------------------------------------------------- eval and cons


def var_root(name: str, proc: str, ctx: tuple = ()):
    if name == ir.GLOBAL:
        return GLOBAL_ROOT
    if name == ir.RET and not ctx:
        return Ret(proc)
    if name == ir.RET:
        return Local("$ret", proc, ctx)
    return Local(name, proc, ctx)


def eval_lv(lv: ir.LValue, env: Callable, pt: Callable, widen=frozenset()) -> set:
    """Access paths denoted by ``lv``.

    ``env`` maps variable names to roots, ``pt`` maps roots to points-to
    sets.  Index variables named in ``widen`` evaluate to π regardless of
    their current set (forced summarization without adequate context).
    """
    paths = [AccessPath(env(lv.base))]
    for off in lv.offsets:
        if isinstance(off, ir.Field):
            new = [FieldOff(off.name)]
        elif isinstance(off, ir.ConstIndex):
            new = [IndexOff(off.value)]
        else:
            vals = () if off.var in widen else pt(env(off.var))
            if off.var not in widen and all(isinstance(v, ConstVal) for v in vals):
                new = [IndexOff(v.value) for v in sorted(vals, key=str)]
            else:
                new = [PI]
        paths = [AccessPath(p.root, p.offsets + (o,)) for p in paths for o in new]
    return set(paths)


def cons_stmt(stmt: ir.Assign, env: Callable, pt: Callable, ctx: tuple = (),
              widen=frozenset()) -> set:
    """Constraints for an assignment evaluated under ``pt``."""
    lhs = eval_lv(stmt.lhs, env, pt, widen)
    rhs = stmt.rhs
    if isinstance(rhs, ir.New):
        srcs = [AllocSite(rhs.label, rhs.cls, ctx)]
    elif isinstance(rhs, ir.Const):
        srcs = [ConstVal(rhs.value)]
    else:
        srcs = sorted(eval_lv(rhs, env, pt, widen), key=str)
    out = set()
    for l in lhs:
        for r in srcs:
            c = make_constraint(l, r)
            if c is not None:
                out.add(c)
    return out


# ------------------------------------------------------------------ types


@dataclass(frozen=True)
class CriticalStatement:
    stmt: object
    owner: str
    site: str
    env: tuple          # sorted (variable, root) pairs
    steps: int = 0
    ctx: tuple = ()     # instance call string of ``owner`` inside the summary

    @property
    def trail(self) -> tuple:
        return self.ctx

    def root(self, name: str):
        for k, v in self.env:
            if k == name:
                return v
        raise KeyError(name)

    def roots(self) -> set:
        return {v for _, v in self.env}

    def key(self) -> tuple:
        return (self.owner, self.site)

    def __str__(self) -> str:
        ctx = "" if not self.ctx else " in " + ">".join(t for _, t in self.ctx)
        return f"[{self.steps}] {self.owner}: {self.stmt}{ctx}"


@dataclass(frozen=True)
class Resolution:
    """One summarization of a critical statement instance."""

    owner: str
    site: str
    steps: int
    targets: int   # dispatch set size; -1 for index accesses
    forced: bool


@dataclass(frozen=True)
class CallEvent:
    ctx: tuple
    site: str
    target: str
    child: object = None   # the callee summary that was inlined, if any


@dataclass
class SummaryStats:
    created: int = 0
    received: int = 0
    summarized: int = 0
    pending_out: int = 0
    widenings: int = 0
    forced: int = 0
    truncations: int = 0
    cap_hits: int = 0
    unreachable_calls: int = 0

    @property
    def balanced(self) -> bool:
        return self.created + self.received == self.summarized + self.pending_out


@dataclass
class HybridSummary:
    owner: str
    delta: frozenset = frozenset()
    pending: tuple = ()
    stats: SummaryStats = field(default_factory=SummaryStats)
    events: tuple = ()
    resolutions: tuple = ()
    diagnostics: tuple = ()

    def dump(self) -> str:
        """Stable text form: constraints then pending statements."""
        lines = [f"summary {self.owner}"]
        lines += [f"  {c}" for c in sorted(map(str, self.delta))]
        lines += [f"  pending {p}" for p in sorted(map(str, self.pending))]
        return "\n".join(lines) + "\n"


def join(a: HybridSummary, b: HybridSummary) -> HybridSummary:
    """Componentwise union."""
    pend = tuple(sorted(set(a.pending) | set(b.pending), key=str))
    return HybridSummary(a.owner, a.delta | b.delta, pend)


def summarize_proc(proc: ir.Procedure, info: ProgramInfo, config, resolver) -> HybridSummary:
    """Summarize one procedure; callee summaries come from ``resolver``."""
    from .inline import Workspace

    ws = Workspace(proc.id, info, config, resolver)
    ws.load_body()
    ws.ready_sweep()
    return ws.finalize()
