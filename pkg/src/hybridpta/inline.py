"""Callsite instantiation, context readiness and the ready operator.

``Workspace`` holds the in-progress state of one procedure: its constraint
set (solved incrementally), the pending critical statements and the
bookkeeping the driver turns into metrics and call graphs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

from . import ir
from .heapstate import (
    DEFAULT_DEPTH, PI, TOP, AccessPath, AllocRoot, AllocSite, Constraint,
    GlobalRoot, Local, Param, Ret, Solution, Sym, cleanup, closed_paths,
    is_closed_value, make_constraint, solve,
)
from .summarize import (
    CallEvent, CriticalStatement, HybridSummary, ProgramInfo, Resolution,
    SummaryStats, cons_stmt, eval_lv, var_root,
)

__all__ = [
    "Config", "Workspace", "instantiate", "context_ready", "BASE", "TRUNCATED",
    "rename_root",
]


@dataclass(frozen=True)
class Config:
    """Analysis configuration.

    ``mode`` is ``comci``, ``hik`` or ``hia``; ``k`` only matters for
    ``hik``.  ComCI behaves as a 0-step limit.
    """

    mode: str = "hia"
    k: int = 3
    depth: int = DEFAULT_DEPTH
    unroll: int = 2
    dispatch_bound: int = 5
    opt1: bool = True
    opt1_threshold: int = 16
    opt1_k: int = 4
    opt2: bool = False
    opt3: bool = True
    pending_cap: int = 64
    all_procs: bool = False
    fuel: int = 10**6

    def __post_init__(self):
        if self.mode not in ("comci", "hik", "hia"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.k < 0 or self.unroll < 1 or self.dispatch_bound < 1:
            raise ValueError("need k >= 0, unroll >= 1, dispatch_bound >= 1")

    @property
    def step_limit(self) -> int | None:
        if self.mode == "comci":
            return 0
        if self.mode == "hik":
            return self.k
        return None

    @property
    def label(self) -> str:
        return {"comci": "ComCI", "hia": "HIA"}.get(self.mode, f"HI{self.k}")

    @classmethod
    def from_mode(cls, text: str, **kw) -> "Config":
        """Parse ``comci``, ``hia`` or ``hi:<k>``."""
        text = text.lower()
        if text.startswith("hi:"):
            return cls(mode="hik", k=int(text[3:]), **kw)
        return cls(mode=text, **kw)


class _Marker:
    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name


BASE = _Marker("BASE")            # recursion cut: result is ⊤
TRUNCATED = _Marker("TRUNCATED")  # permutation guard fired


def rename_root(root, callee: str, prefix: tuple):
    if isinstance(root, Param):
        return Local(f"$a{root.index}", callee, prefix)
    if isinstance(root, Ret):
        return Local("$ret", callee, prefix)
    if isinstance(root, Local):
        return Local(root.name, root.proc, prefix + root.ctx)
    if isinstance(root, AllocRoot):
        return AllocRoot(root.site.with_prefix(prefix))
    return root


def _rename_value(v, callee, prefix):
    if isinstance(v, AccessPath):
        return AccessPath(rename_root(v.root, callee, prefix), v.offsets)
    if isinstance(v, AllocSite):
        return v.with_prefix(prefix)
    return v


def instantiate(summary: HybridSummary, callee: str, prefix: tuple,
                args: list, result: AccessPath | None, nparams: int):
    """Constraints and propagated critical statements for one callsite.

    ``args`` are caller-side access paths; ``prefix`` is the instance call
    string of the callee (caller instance string plus this site).
    """
    cs = set()
    for i, a in enumerate(args[:nparams]):
        c = make_constraint(AccessPath(Local(f"$a{i}", callee, prefix)), a)
        if c is not None:
            cs.add(c)
    if result is not None:
        cs.add(Constraint(result, AccessPath(Local("$ret", callee, prefix))))
    for c in summary.delta:
        c2 = make_constraint(_rename_value(c.lhs, callee, prefix),
                             _rename_value(c.rhs, callee, prefix))
        if c2 is not None:
            cs.add(c2)
    crits = [
        replace(
            p,
            env=tuple((n, rename_root(r, callee, prefix)) for n, r in p.env),
            steps=p.steps + 1,
            ctx=prefix + p.ctx,
        )
        for p in summary.pending
    ]
    return cs, crits


# ----------------------------------------------------------- readiness


def _index_vars(stmt) -> set:
    out = set()
    lvs = [stmt.lhs] + ([stmt.rhs] if isinstance(stmt.rhs, ir.LValue) else [])
    for lv in lvs:
        out.update(o.var for o in lv.offsets if isinstance(o, ir.VarIndex))
    return out


def _outputs(crit: CriticalStatement) -> set:
    s = crit.stmt
    lv = s.lhs if isinstance(s, ir.Assign) else s.result
    if lv is None or lv.offsets:
        return set()
    return {crit.root(lv.base)}


def _closed(sol: Solution, path: AccessPath) -> bool:
    return all(is_closed_value(v) for v in sol.pt(path))


def context_ready(crit: CriticalStatement, closed_sol: Solution, config: Config,
                  info: ProgramInfo | None = None, opt1_hot: bool = False) -> tuple[bool, bool]:
    """Return (ready, adequate).

    Adequate means the statement's context can no longer change: every
    index variable (or the receiver) is closed.  Ready adds the k-limit and
    the Opt1 fallback on top.
    """
    s = crit.stmt
    if isinstance(s, ir.Assign):
        adequate = all(_closed(closed_sol, AccessPath(crit.root(v))) for v in _index_vars(s))
    else:
        recv = eval_lv(s.args[0], crit.root, lambda r: ())
        adequate = all(_closed(closed_sol, p) for p in recv)
    if adequate:
        return True, True
    limit = config.step_limit
    if limit is not None and crit.steps >= limit:
        return True, False
    if opt1_hot and crit.steps >= config.opt1_k:
        return True, False
    return False, False


# ------------------------------------------------------------ workspace


class Workspace:
    """In-progress hybrid summary of one procedure."""

    def __init__(self, owner: str, info: ProgramInfo, config: Config, resolver):
        self.owner = owner
        self.info = info
        self.config = config
        self.resolver = resolver
        self.constraints: set = set()
        self.sol = Solution(config.depth)
        self.pending: list[CriticalStatement] = []
        self.stats = SummaryStats()
        self.events: list[CallEvent] = []
        self.resolutions: list[Resolution] = []
        self.diagnostics: list[str] = []

    # -- state

    def add(self, cs) -> bool:
        changed = False
        for c in sorted(cs, key=str):
            if c not in self.constraints:
                self.constraints.add(c)
                self.sol.add(c)
                changed = True
        return changed

    def pt(self, root) -> frozenset:
        return self.sol.var_pt(root)

    def _env(self, ctx: tuple) -> Callable:
        return lambda name: var_root(name, self.owner, ctx)

    # -- body

    def load_body(self) -> None:
        pid = self.owner
        for i, name in enumerate(self.info.params(pid)):
            self.add([Constraint(AccessPath(Local(name, pid)), AccessPath(Param(i, pid)))])
        env = self._env(())
        for ls in self.info.bodies[pid]:
            s = ls.stmt
            if ls.critical:
                names = sorted(s.variables())
                self.pending.append(CriticalStatement(
                    s, pid, ls.site, tuple((n, env(n)) for n in names)))
                self.stats.created += 1
            elif isinstance(s, ir.Assign):
                self.add(cons_stmt(s, env, self.pt))
            else:
                targets = {s.callee} if not s.is_virtual else set(self.info.impls(s.callee))
                self.call(ls.site, s, env, (), sorted(targets))

    # -- calls

    def call(self, site: str, stmt: ir.Call, env: Callable, ctx: tuple,
             targets, method: str | None = None, width: int = 0) -> None:
        args = [min(eval_lv(a, env, self.pt), key=str) for a in stmt.args]
        result = None
        if stmt.result is not None:
            result = min(eval_lv(stmt.result, env, self.pt), key=str)
        for t in targets:
            summ = self.resolver.summary(t, method=method, width=width)
            self.events.append(CallEvent(ctx, site, t, summ if isinstance(summ, HybridSummary) else None))
            if summ is BASE or summ is TRUNCATED:
                if summ is TRUNCATED:
                    self.stats.truncations += 1
                    self.diagnostics.append(
                        f"warning: permutation guard truncated {method} at {site} ({width} targets)")
                if result is not None:
                    self.add([Constraint(result, TOP)])
                continue
            prefix = ctx + ((site, t),)
            cs, crits = instantiate(summ, t, prefix, args, result, len(self.info.params(t)))
            self.add(cs)
            self.pending.extend(crits)
            self.stats.received += len(crits)
            self.resolver.tick(len(cs) + 1)

    # -- resolution

    def resolve(self, crit: CriticalStatement, adequate: bool) -> None:
        s = crit.stmt
        self.stats.summarized += 1
        if not adequate:
            self.stats.forced += 1
        if isinstance(s, ir.Assign):
            widen = frozenset() if adequate else frozenset(_index_vars(s))
            self.add(cons_stmt(s, crit.root, self.pt, crit.ctx, widen))
            self.resolutions.append(Resolution(crit.owner, crit.site, crit.steps, -1, not adequate))
            return
        impls = self.info.impls(s.callee)
        if adequate:
            recv = eval_lv(s.args[0], crit.root, self.pt)
            classes = {v.cls for p in recv for v in self.sol.pt(p) if isinstance(v, AllocSite)}
            targets = ir.dispatch_targets(self.info.program, s.callee, classes)
        else:
            targets = impls
        self.resolutions.append(Resolution(crit.owner, crit.site, crit.steps, len(targets), not adequate))
        if not targets:
            self.stats.unreachable_calls += 1
            self.diagnostics.append(f"note: call {crit.site} has no receiver objects")
        self.call(crit.site, s, crit.root, crit.ctx, sorted(targets), s.callee, len(targets))

    def _opt1_hot(self, crit: CriticalStatement) -> bool:
        if not self.config.opt1:
            return False
        return self.resolver.critical_density(crit.owner) > self.config.opt1_threshold

    def _opt2(self, crit: CriticalStatement) -> bool:
        if not self.config.opt2 or not isinstance(crit.stmt, ir.Call):
            return False
        recv = crit.stmt.args[0]
        target = AccessPath(crit.root(recv.base))
        return any(c.lhs == target and isinstance(c.rhs, AccessPath) and PI in c.rhs.offsets
                   for c in self.constraints)

    def closed_solution(self) -> Solution:
        tainted = set()
        pvars = set()
        for p in self.pending:
            tainted |= _outputs(p)
            pvars |= p.roots()
        return closed_paths(self.constraints, self.config.depth, tainted, pvars, {Ret(self.owner)})

    def ready_sweep(self) -> None:
        """Summarize every pending statement whose context is ready."""
        while self.pending:
            csol = self.closed_solution()
            ready = []
            for crit in self.pending:
                ok, adequate = context_ready(crit, csol, self.config, self.info, self._opt1_hot(crit))
                if not ok and self._opt2(crit):
                    ok = True
                if ok:
                    ready.append((crit, adequate))
            rest = [p for p in self.pending if all(p is not r for r, _ in ready)]
            cap = self.config.pending_cap
            if len(rest) > cap:
                rest.sort(key=lambda p: (-p.steps, str(p)))
                over, rest = rest[: len(rest) - cap], rest[len(rest) - cap:]
                self.stats.cap_hits += 1
                self.diagnostics.append(f"warning: pending cap {cap} hit in {self.owner}; forced {len(over)}")
                ready.extend((p, False) for p in over)
            if not ready:
                break
            self.pending = rest
            for crit, adequate in sorted(ready, key=lambda x: str(x[0])):
                self.resolve(crit, adequate)

    # -- results

    def finalize(self) -> HybridSummary:
        pvars = set()
        for p in self.pending:
            pvars |= p.roots()
        sol = solve(self.constraints, self.config.depth, sym_vars=pvars) if pvars else self.sol
        delta = cleanup(sol, {Ret(self.owner)}, pvars)
        self.stats.pending_out = len(self.pending)
        self.stats.widenings = sol.widenings
        return HybridSummary(
            self.owner, frozenset(delta),
            tuple(sorted(self.pending, key=str)), self.stats,
            tuple(self.events), tuple(self.resolutions), tuple(self.diagnostics),
        )

    def apply_at_root(self) -> Solution:
        """Force the remaining statements with the root's own context.

        Dispatch and index evaluation are redone whenever points-to sets
        grow, until nothing changes.
        """
        done: dict = {}
        order: list = []
        while True:
            changed = False
            for crit in list(self.pending):
                s = crit.stmt
                key = (crit.site, crit.ctx)
                if key not in done:
                    done[key] = set()
                    order.append(crit)
                    self.stats.summarized += 1
                if isinstance(s, ir.Assign):
                    changed |= self.add(cons_stmt(s, crit.root, self.pt, crit.ctx))
                    continue
                recv = eval_lv(s.args[0], crit.root, self.pt)
                vals = {v for p in recv for v in self.sol.pt(p)}
                if any(not is_closed_value(v) for v in vals):
                    targets = set(self.info.impls(s.callee))
                else:
                    classes = {v.cls for v in vals if isinstance(v, AllocSite)}
                    targets = set(ir.dispatch_targets(self.info.program, s.callee, classes))
                new = sorted(targets - done[key])
                if new:
                    done[key].update(new)
                    self.call(crit.site, s, crit.root, crit.ctx, new, s.callee, len(targets))
                    changed = True
            if not changed:
                break
        for crit in order:
            width = -1 if isinstance(crit.stmt, ir.Assign) else len(done[(crit.site, crit.ctx)])
            self.resolutions.append(Resolution(crit.owner, crit.site, crit.steps, width, False))
        self.pending = []
        self.stats.pending_out = 0
        return self.sol
