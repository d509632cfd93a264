"""Access paths, set constraints and the inclusion-constraint solver.

Values flowing through the constraint graph are allocation sites,
constants, symbolic values standing for whatever a free access path
(rooted at a parameter or the global object) points to in the caller,
and the ``TOP`` marker used by over-approximated base cases.

The solver is a difference-propagation worklist over four node kinds:
variable cells, heap cells ``C(o, off)``, read nodes ``R(o, off)`` and
path nodes (the result of dereferencing a path prefix).  Loads and stores
are resolved lazily as objects reach the dereferenced prefix.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Union

__all__ = [
    "Local", "Param", "Ret", "GlobalRoot", "GLOBAL_ROOT", "AllocRoot",
    "AllocSite", "FieldOff", "IndexOff", "PI", "STAR", "AccessPath",
    "ConstVal", "Sym", "TOP", "TAINT", "Constraint", "AbstractState",
    "Solution", "solve", "points_to", "free_vars", "cleanup", "escaping",
    "closed_paths", "is_closed_value", "DEFAULT_DEPTH",
]

DEFAULT_DEPTH = 6


# ------------------------------------------------------------------ roots


@dataclass(frozen=True, slots=True)
class Local:
    name: str
    proc: str
    ctx: tuple = ()

    def __str__(self) -> str:
        return f"{self.name}@{self.proc}{_ctx_text(self.ctx)}"


@dataclass(frozen=True, slots=True)
class Param:
    index: int
    proc: str

    def __str__(self) -> str:
        return f"par{self.index + 1}@{self.proc}"


@dataclass(frozen=True, slots=True)
class Ret:
    proc: str

    def __str__(self) -> str:
        return f"ret@{self.proc}"


@dataclass(frozen=True, slots=True)
class GlobalRoot:
    def __str__(self) -> str:
        return "$G"


GLOBAL_ROOT = GlobalRoot()


@dataclass(frozen=True, slots=True)
class AllocSite:
    label: str
    cls: str
    ctx: tuple = ()

    def __str__(self) -> str:
        return f"l{self.label}{_ctx_text(self.ctx)}"

    def with_prefix(self, prefix: tuple) -> "AllocSite":
        return AllocSite(self.label, self.cls, prefix + self.ctx)


@dataclass(frozen=True, slots=True)
class AllocRoot:
    site: AllocSite

    def __str__(self) -> str:
        return str(self.site)


Root = Union[Local, Param, Ret, GlobalRoot, AllocRoot]


def _ctx_text(ctx: tuple) -> str:
    if not ctx:
        return ""
    return "<" + ",".join(f"{s}>{t}" for s, t in ctx) + ">"


# ---------------------------------------------------------------- offsets


@dataclass(frozen=True, slots=True)
class FieldOff:
    name: str

    def __str__(self) -> str:
        return f".{self.name}"


@dataclass(frozen=True, slots=True)
class IndexOff:
    value: Union[str, int]

    def __str__(self) -> str:
        return f"[{self.value!r}]" if isinstance(self.value, str) else f"[{self.value}]"


class _Marker:
    __slots__ = ("text",)

    def __init__(self, text: str):
        self.text = text

    def __repr__(self) -> str:
        return self.text

    __str__ = __repr__

    def __reduce__(self):
        return (_marker, (self.text,))


_MARKERS: dict[str, _Marker] = {}


def _marker(text: str) -> _Marker:
    if text not in _MARKERS:
        _MARKERS[text] = _Marker(text)
    return _MARKERS[text]


PI = _marker("[π]")      # undecidable index
STAR = _marker(".*")     # widened suffix
TOP = _marker("⊤")       # over-approximated unknown value
TAINT = _marker("τ")     # context-dependence marker, closedness checks only


def _feeds(cell_off, read_off) -> bool:
    """Does a store at ``cell_off`` become visible to a load at ``read_off``."""
    if cell_off is STAR or read_off is STAR:
        return True
    if isinstance(read_off, FieldOff):
        return cell_off == read_off
    if isinstance(cell_off, FieldOff):
        return False
    if read_off is PI or cell_off is PI:
        return True
    return cell_off == read_off


# ------------------------------------------------------------------ paths


@dataclass(frozen=True, slots=True)
class AccessPath:
    root: object
    offsets: tuple = ()

    def __str__(self) -> str:
        return str(self.root) + "".join(str(o) for o in self.offsets)

    @property
    def is_free(self) -> bool:
        return isinstance(self.root, (Param, Ret, GlobalRoot))

    def prefix(self) -> "AccessPath":
        return AccessPath(self.root, self.offsets[:-1])


def extend(path: AccessPath, off, depth: int) -> tuple[AccessPath, bool]:
    """Append ``off``; returns the path and whether widening happened."""
    offs = path.offsets
    if offs and offs[-1] is STAR:
        return path, False
    if len(offs) + 1 > depth:
        return AccessPath(path.root, offs[: max(depth - 1, 0)] + (STAR,)), True
    return AccessPath(path.root, offs + (off,)), False


# ----------------------------------------------------------------- values


@dataclass(frozen=True, slots=True)
class ConstVal:
    value: Union[str, int]

    def __str__(self) -> str:
        return repr(self.value) if isinstance(self.value, str) else str(self.value)


@dataclass(frozen=True, slots=True)
class Sym:
    """The caller-side points-to set of a free access path."""

    path: AccessPath

    def __str__(self) -> str:
        return str(self.path)


def _storable(v) -> bool:
    return isinstance(v, (AllocSite, Sym))


def _readable(v) -> bool:
    return isinstance(v, (AllocSite, Sym)) or v is TOP or v is TAINT


def is_closed_value(v) -> bool:
    return not (isinstance(v, Sym) or v is TOP or v is TAINT)


# ------------------------------------------------------------ constraints


@dataclass(frozen=True, slots=True)
class Constraint:
    """``lhs ⊇ rhs`` where rhs is a path or a singleton value."""

    lhs: AccessPath
    rhs: object

    def __str__(self) -> str:
        if isinstance(self.rhs, AccessPath):
            return f"{self.lhs} ⊇ {self.rhs}"
        return f"{self.lhs} ⊇ {{{self.rhs}}}"


def make_constraint(lhs: AccessPath, rhs) -> Constraint | None:
    if lhs == rhs:
        return None
    return Constraint(lhs, rhs)


# ----------------------------------------------------------------- solver


class Solution:
    """A solved constraint graph; ``pt`` extends it on demand."""

    def __init__(self, depth: int = DEFAULT_DEPTH, taint_vars=(), taint_objs=(), sym_vars=()):
        self.depth = depth
        self.sym_vars = frozenset(sym_vars)
        self.taint_vars = frozenset(taint_vars)
        self.taint_objs = frozenset(taint_objs)
        self.pts: dict = defaultdict(set)
        self.succ: dict = defaultdict(set)
        self.pred: dict = defaultdict(set)
        self.watch: dict = defaultdict(list)
        self.cells_of: dict = defaultdict(dict)
        self.reads_of: dict = defaultdict(dict)
        self.path_nodes: set = set()
        self.widenings = 0
        self._work: list = []
        self.constraints: list = []

    # -- node construction

    def _root_node(self, root):
        if isinstance(root, (Local, Ret)):
            key = ("v", root)
            if key not in self.pts:
                self.pts[key] = set()
                if root in self.taint_vars:
                    self._add(key, {TAINT})
                if root in self.sym_vars:
                    self._add(key, {Sym(AccessPath(root))})
            return key
        key = ("k", root)
        if key not in self.pts:
            if isinstance(root, AllocRoot):
                val = root.site
            else:
                val = Sym(AccessPath(root))
            self.pts[key] = set()
            self._add(key, {val})
        return key

    def source_node(self, path: AccessPath):
        if not path.offsets:
            return self._root_node(path.root)
        key = ("p", path)
        if key in self.path_nodes:
            return key
        self.path_nodes.add(key)
        self.pts[key] = set()
        base = self.source_node(path.prefix())
        self._watch(base, ("load", path.offsets[-1], key))
        return key

    def literal_node(self, value):
        key = ("lit", value)
        if key not in self.pts:
            self.pts[key] = set()
            self._add(key, {value})
        return key

    def _cell(self, obj, off):
        cells = self.cells_of[obj]
        key = cells.get(off)
        if key is None:
            key = ("c", obj, off)
            cells[off] = key
            self.pts[key] = set()
            for roff, rkey in self.reads_of[obj].items():
                if _feeds(off, roff):
                    self._edge(key, rkey)
        return key

    def _read(self, obj, off):
        reads = self.reads_of[obj]
        key = reads.get(off)
        if key is not None:
            return key
        key = ("r", obj, off)
        reads[off] = key
        self.pts[key] = set()
        seed = set()
        if isinstance(obj, Sym):
            p, widened = extend(obj.path, off, self.depth)
            self.widenings += widened
            seed.add(Sym(p))
        elif obj is TOP:
            seed.add(TOP)
        elif obj is TAINT:
            seed.add(TAINT)
        if obj in self.taint_objs:
            seed.add(TAINT)
        if seed:
            self._add(key, seed)
        for coff, ckey in self.cells_of[obj].items():
            if _feeds(coff, off):
                self._edge(ckey, key)
        return key

    # -- propagation

    def _add(self, key, values) -> None:
        cur = self.pts[key]
        new = [v for v in values if v not in cur]
        if new:
            cur.update(new)
            self._work.append((key, new))

    def _edge(self, a, b) -> None:
        if b in self.succ[a]:
            return
        self.succ[a].add(b)
        self.pred[b].add(a)
        if self.pts[a]:
            self._add(b, self.pts[a])

    def _watch(self, node, w) -> None:
        self.watch[node].append(w)
        for obj in list(self.pts[node]):
            self._fire(w, obj)

    def _fire(self, w, obj) -> None:
        kind, off, other = w
        if kind == "load":
            if _readable(obj):
                self._edge(self._read(obj, off), other)
        elif _storable(obj):
            self._edge(other, self._cell(obj, off))

    def _drain(self) -> None:
        work = self._work
        while work:
            key, delta = work.pop()
            for s in list(self.succ[key]):
                self._add(s, delta)
            for w in list(self.watch.get(key, ())):
                for obj in delta:
                    self._fire(w, obj)

    def add(self, c: Constraint) -> None:
        self.constraints.append(c)
        src = self.source_node(c.rhs) if isinstance(c.rhs, AccessPath) else self.literal_node(c.rhs)
        lhs = c.lhs
        if not lhs.offsets:
            if isinstance(lhs.root, (Local, Ret)):
                self._edge(src, self._root_node(lhs.root))
        else:
            base = self.source_node(lhs.prefix())
            self._watch(base, ("store", lhs.offsets[-1], src))
        self._drain()

    def add_all(self, cs: Iterable[Constraint]) -> "Solution":
        for c in cs:
            self.add(c)
        return self

    # -- queries

    def pt(self, path: AccessPath) -> frozenset:
        key = self.source_node(path)
        self._drain()
        return frozenset(self.pts[key])

    def var_pt(self, root) -> frozenset:
        return self.pt(AccessPath(root))

    def objects(self) -> set:
        return set(self.cells_of) | set(self.reads_of)


def solve(constraints: Iterable[Constraint], depth: int = DEFAULT_DEPTH,
          taint_vars=(), taint_objs=(), sym_vars=()) -> Solution:
    """Least solution of a constraint set (sorted for deterministic order).

    Variables in ``sym_vars`` are treated as free: they self-seed a
    symbolic value, like parameters do.
    """
    sol = Solution(depth, taint_vars, taint_objs, sym_vars)
    return sol.add_all(sorted(set(constraints), key=str))


def points_to(sol: Solution, path: AccessPath) -> frozenset:
    return sol.pt(path)


# ---------------------------------------------------------- abstract state


@dataclass
class AbstractState:
    """A constraint set with a memoized solution."""

    constraints: set = field(default_factory=set)
    depth: int = DEFAULT_DEPTH
    _solution: Solution | None = field(default=None, repr=False, compare=False)

    def add(self, cs: Iterable[Constraint]) -> bool:
        before = len(self.constraints)
        for c in cs:
            if c is not None and c not in self.constraints:
                self.constraints.add(c)
                if self._solution is not None:
                    self._solution.add(c)
        return len(self.constraints) != before

    def join(self, other: "AbstractState") -> "AbstractState":
        return AbstractState(self.constraints | other.constraints, self.depth)

    @property
    def solution(self) -> Solution:
        if self._solution is None:
            self._solution = solve(self.constraints, self.depth)
        return self._solution

    def pt(self, path: AccessPath) -> frozenset:
        return self.solution.pt(path)


# ------------------------------------------------------------- projection


def _obj_path(obj) -> AccessPath | None:
    if isinstance(obj, Sym):
        return obj.path
    if isinstance(obj, AllocSite):
        return AccessPath(AllocRoot(obj))
    return None


def _node_path(sol: Solution, key) -> AccessPath | None:
    kind = key[0]
    if kind in ("v", "k"):
        return AccessPath(key[1])
    if kind in ("c", "r"):
        base = _obj_path(key[1])
        if base is None:
            return None
        return extend(base, key[2], sol.depth)[0]
    return None


def escaping(sol: Solution, kept_vars: Iterable) -> set:
    """Objects observable outside the summarized procedure."""
    esc: set = {TOP}
    todo = []
    for root in kept_vars:
        todo.extend(sol.pts.get(("v", root), ()))
    for obj, cells in sol.cells_of.items():
        if isinstance(obj, Sym):
            for ckey in cells.values():
                todo.extend(sol.pts[ckey])
    while todo:
        v = todo.pop()
        if v in esc or not isinstance(v, AllocSite):
            continue
        esc.add(v)
        for ckey in sol.cells_of.get(v, {}).values():
            todo.extend(sol.pts[ckey])
    return esc


def cleanup(sol: Solution, ret_roots: Iterable, pending_vars: Iterable) -> set:
    """Project a solved state onto what a caller can observe.

    Kept targets are the return cell, pending-statement variables and heap
    cells of symbolic or escaping objects.  Each is related directly to the
    kept sources reachable backwards through local nodes.
    """
    pending_vars = set(pending_vars)
    kept_vars = set(ret_roots) | pending_vars
    esc = escaping(sol, kept_vars)

    def kept_obj(o) -> bool:
        return isinstance(o, Sym) or (isinstance(o, AllocSite) and o in esc)

    def stop(key) -> bool:
        kind = key[0]
        if kind == "k" and not isinstance(key[1], AllocRoot):
            return True
        if kind == "v":
            return key[1] in kept_vars
        if kind == "r":
            return kept_obj(key[1])
        return False

    targets = [("v", r) for r in sorted(kept_vars, key=str) if ("v", r) in sol.pts]
    for obj, cells in sol.cells_of.items():
        if kept_obj(obj):
            targets.extend(cells.values())

    out: set = set()
    for t in targets:
        tpath = _node_path(sol, t)
        if tpath is None:
            continue
        seen = {t}
        stack = list(sol.pred.get(t, ()))
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            kind = n[0]
            if stop(n):
                c = make_constraint(tpath, _node_path(sol, n))
            elif kind == "lit" or (kind == "k" and isinstance(n[1], AllocRoot)):
                c = None
                for v in sol.pts[n]:
                    c2 = make_constraint(tpath, v)
                    if c2 is not None:
                        out.add(c2)
            elif kind == "r" and n[1] is TOP:
                c = make_constraint(tpath, TOP)
            else:
                stack.extend(sol.pred.get(n, ()))
                continue
            if c is not None:
                out.add(c)
    return out


def free_vars(constraints: Iterable[Constraint], pending_vars: Iterable = ()) -> set:
    """Free access paths mentioned by a summary plus pending variables."""
    out = {AccessPath(v) for v in pending_vars}
    for c in constraints:
        for p in (c.lhs, c.rhs):
            if isinstance(p, AccessPath) and p.is_free:
                out.add(p)
    return out


def closed_paths(constraints: Iterable[Constraint], depth: int, tainted_vars,
                 pending_vars, ret_roots=()) -> Solution:
    """Solve in taint mode: a path is closed iff its set holds no
    symbolic, ``TOP`` or taint value."""
    base = solve(constraints, depth, sym_vars=pending_vars)
    esc = escaping(base, set(pending_vars) | set(ret_roots))
    esc.discard(TOP)
    return solve(constraints, depth, taint_vars=tainted_vars, taint_objs=esc)
