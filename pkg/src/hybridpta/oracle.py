"""Top-down reference analyses.

One engine covers the whole family: procedure instances are keyed by the
last ``k`` call-string entries, so ``k=0`` is the context-insensitive
whole-program analysis and ``k=None`` is unbounded inlining (every call
chain gets fresh variables and allocation sites).  The engine shares the
solver and the eval/cons rules with the compositional analysis, so any
difference between the two can only come from the inlining strategy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ir
from .driver import root_facts
from .heapstate import (
    PI, TOP, AccessPath, AllocSite, Constraint, IndexOff, Local, Param,
    Solution, Sym, is_closed_value,
)
from .summarize import ProgramInfo, cons_stmt, eval_lv, var_root

__all__ = [
    "OutOfScope", "OracleResult", "kcfa", "inline_exact", "top_down_ci",
    "truncate_value", "truncate_facts", "covers", "cover_violations",
    "fact_divergences",
]


class OutOfScope(RuntimeError):
    """The input is too large for the unbounded oracle."""


@dataclass
class OracleResult:
    k: int | None
    states: dict
    facts: dict
    edges: set = field(default_factory=set)
    chains: set = field(default_factory=set)
    instances: int = 0
    reached: set = field(default_factory=set)
    poly: set = field(default_factory=set)


class _Engine:
    def __init__(self, info: ProgramInfo, k: int | None, unroll: int, depth: int, fuel: int):
        self.info = info
        self.k = k
        self.unroll = unroll
        self.fuel = fuel
        self.sol = Solution(depth)
        self.constraints: set = set()
        self.instances: set = set()
        self.items: list = []
        self.queue: list = []
        self.edges: set = set()
        self.chains: set = set()
        self.dispatched: dict = {}
        self.poly: set = set()
        self.used = 0

    def _tick(self, n=1):
        self.used += n
        if self.used > self.fuel:
            raise OutOfScope(f"oracle fuel {self.fuel} exhausted")

    def add(self, cs) -> bool:
        changed = False
        for c in sorted(cs, key=str):
            if c not in self.constraints:
                self.constraints.add(c)
                self.sol.add(c)
                changed = True
        self._tick(1)
        return changed

    def pt(self, root):
        return self.sol.var_pt(root)

    def _cut(self, ctx: tuple) -> tuple:
        if self.k is None:
            return ctx
        return ctx[-self.k:] if self.k else ()

    def add_root(self, root: str) -> None:
        for i, name in enumerate(self.info.params(root)):
            self.add([Constraint(AccessPath(Local(name, root)), AccessPath(Param(i, root)))])
        self._instance(root, (), (root,))

    def _instance(self, pid: str, ctx: tuple, chain: tuple) -> None:
        key = (pid, ctx)
        if key in self.instances:
            return
        self.instances.add(key)
        self._tick(1)
        self.queue.append((pid, ctx, chain))

    def _expand(self, pid, ctx, chain) -> None:
        env = lambda n: var_root(n, pid, ctx)
        for ls in self.info.bodies[pid]:
            s = ls.stmt
            if isinstance(s, ir.Assign):
                if ls.critical:
                    self.items.append((ls.site, s, env, ctx, chain, pid))
                else:
                    self.add(cons_stmt(s, env, self.pt, ctx))
            elif s.is_virtual and ls.critical:
                self.items.append((ls.site, s, env, ctx, chain, pid))
            else:
                targets = [s.callee] if not s.is_virtual else sorted(self.info.impls(s.callee))
                for t in targets:
                    self._link(ls.site, s, env, ctx, chain, pid, t)

    def _link(self, site, stmt, env, ctx, chain, owner, target) -> None:
        self.edges.add((site, target))
        full = chain + (target,)
        self.chains.add(full)
        result = None
        if stmt.result is not None:
            result = min(eval_lv(stmt.result, env, self.pt), key=str)
        if self.k is None and chain.count(target) >= self.unroll:
            if result is not None:
                self.add([Constraint(result, TOP)])
            return
        cctx = self._cut(ctx + ((site, target),))
        params = self.info.params(target)
        cs = []
        for i, a in enumerate(stmt.args[: len(params)]):
            p = min(eval_lv(a, env, self.pt), key=str)
            cs.append(Constraint(AccessPath(Local(params[i], target, cctx)), p))
        if result is not None:
            cs.append(Constraint(result, AccessPath(var_root(ir.RET, target, cctx))))
        cs = [c for c in cs if c.lhs != c.rhs]
        self.add(cs)
        self._instance(target, cctx, full)

    def _item(self, item) -> bool:
        site, s, env, ctx, chain, owner = item
        if isinstance(s, ir.Assign):
            return self.add(cons_stmt(s, env, self.pt, ctx))
        recv = eval_lv(s.args[0], env, self.pt)
        vals = {v for p in recv for v in self.sol.pt(p)}
        if any(not is_closed_value(v) for v in vals):
            targets = set(self.info.impls(s.callee))
        else:
            classes = {v.cls for v in vals if isinstance(v, AllocSite)}
            targets = set(ir.dispatch_targets(self.info.program, s.callee, classes))
        if len(targets) > 1:
            self.poly.add(site)
        done = self.dispatched.setdefault((site, ctx, chain), set())
        new = sorted(targets - done)
        for t in new:
            done.add(t)
            self._link(site, s, env, ctx, chain, owner, t)
        return bool(new)

    def run(self) -> None:
        while True:
            changed = False
            while self.queue:
                self._expand(*self.queue.pop(0))
                changed = True
            for item in list(self.items):
                changed |= self._item(item)
            if not changed and not self.queue:
                break


def kcfa(program: ir.Program, k: int | None, roots=None, unroll: int = 2,
         depth: int = 6, fuel: int = 10**6, info: ProgramInfo | None = None,
         shared: bool = False) -> OracleResult:
    """k-callsite-sensitive top-down analysis (``k=None``: unbounded).

    Each root is analyzed on its own unless ``shared`` is set, in which case
    all roots feed one global state.
    """
    info = info or ProgramInfo(program)
    roots = list(program.roots if roots is None else roots)
    groups = [roots] if shared else [[r] for r in roots]
    states, facts = {}, {}
    edges, chains, n = set(), set(), 0
    reached, poly = set(), set()
    for g in groups:
        eng = _Engine(info, k, unroll, depth, fuel)
        for r in g:
            eng.add_root(r)
        eng.run()
        for r in g:
            states[r] = eng.sol
            facts.update(root_facts(program, r, eng.sol))
        edges |= eng.edges
        chains |= eng.chains
        n += len(eng.instances)
        reached |= {pid for pid, _ in eng.instances}
        poly |= eng.poly
    return OracleResult(k, states, facts, edges, chains, n, reached, poly)


def inline_exact(program: ir.Program, k: int | None = None, **kw) -> OracleResult:
    """Full statement inlining to call depth ``k`` (None = unbounded)."""
    return kcfa(program, k, **kw)


def top_down_ci(program: ir.Program, **kw) -> OracleResult:
    """Context-insensitive whole-program analysis: one copy per procedure."""
    return kcfa(program, 0, shared=True, **kw)


# ------------------------------------------------------------ comparisons


def truncate_value(v, k: int | None):
    if k is None or not isinstance(v, AllocSite):
        return v
    ctx = v.ctx[-k:] if k else ()
    return AllocSite(v.label, v.cls, ctx)


def truncate_facts(facts: dict, k: int | None) -> dict:
    return {key: frozenset(truncate_value(v, k) for v in vals) for key, vals in facts.items()}


def _pi_generalizations(path: AccessPath):
    offs = path.offsets
    idx = [i for i, o in enumerate(offs) if isinstance(o, IndexOff)]
    for mask in range(1, 1 << len(idx)):
        new = list(offs)
        for b, i in enumerate(idx):
            if mask >> b & 1:
                new[i] = PI
        yield AccessPath(path.root, tuple(new))


def covers(big: frozenset, v) -> bool:
    """Does the set ``big`` account for value ``v``.

    ``TOP`` covers anything; a symbolic value read through π covers the
    same read through any constant index.
    """
    if v in big or TOP in big:
        return True
    if isinstance(v, Sym):
        return any(Sym(g) in big for g in _pi_generalizations(v.path))
    return False


def cover_violations(big: dict, small: dict) -> list:
    """Facts of ``small`` not accounted for by ``big``."""
    out = []
    for key in sorted(small, key=str):
        b = big.get(key, frozenset())
        for v in sorted(small[key], key=str):
            if not covers(b, v):
                out.append((key, v))
    return out


def fact_divergences(a: dict, b: dict) -> list:
    """Keys whose sets differ, with the symmetric difference."""
    out = []
    for key in sorted(set(a) | set(b), key=str):
        x, y = a.get(key, frozenset()), b.get(key, frozenset())
        if x != y:
            out.append((key, sorted(map(str, x - y)), sorted(map(str, y - x))))
    return out
