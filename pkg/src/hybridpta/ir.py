"""Program model, textual syntax and class-hierarchy dispatch.

A program is a class table, a procedure table, a list of root procedures
and a list of alias assertions.  Procedure bodies are flow-insensitive:
the body is a set of statements, order carries no meaning.

Concrete syntax (``//`` comments)::

    class Y : X { method poly = poly_Y; }
    interface-like classes declare ``abstract poly;``
    proc foo(this, x, obj) {
        tx = scall id(this, x);
        r = vcall poly(tx, obj);
        return r;
    }
    root service;
    assert noalias service.first, service.third expect pass;
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Union

__all__ = [
    "Field", "ConstIndex", "VarIndex", "LValue", "Const", "New",
    "Assign", "Call", "ClassDecl", "Procedure", "AliasAssertion", "Program",
    "IRError", "ParseError", "DuplicateLabelError", "UnresolvedMethodError",
    "SupersCycleError", "UndefinedVariableError", "parse", "pretty",
    "dispatch_targets", "implementations", "TOP_CLASSES", "GLOBAL", "RET",
]

GLOBAL = "$G"
RET = "ret"


class _TopClasses:
    """Receiver class set standing for every declared class."""

    def __repr__(self) -> str:
        return "TOP_CLASSES"


TOP_CLASSES = _TopClasses()


# ---------------------------------------------------------------- errors


class IRError(Exception):
    pass


class ParseError(IRError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


class DuplicateLabelError(IRError):
    pass


class UnresolvedMethodError(IRError):
    pass


class SupersCycleError(IRError):
    pass


class UndefinedVariableError(IRError):
    pass


# ----------------------------------------------------------------- model


@dataclass(frozen=True)
class Field:
    name: str

    def __str__(self) -> str:
        return f".{self.name}"


@dataclass(frozen=True)
class ConstIndex:
    value: Union[str, int]

    def __str__(self) -> str:
        return f"[{_const_text(self.value)}]"


@dataclass(frozen=True)
class VarIndex:
    var: str

    def __str__(self) -> str:
        return f"[{self.var}]"


Offset = Union[Field, ConstIndex, VarIndex]


@dataclass(frozen=True)
class LValue:
    base: str
    offsets: tuple = ()

    def __str__(self) -> str:
        return self.base + "".join(str(o) for o in self.offsets)

    def variables(self) -> set[str]:
        out = {self.base}
        out.update(o.var for o in self.offsets if isinstance(o, VarIndex))
        return out

    @property
    def has_var_index(self) -> bool:
        return any(isinstance(o, VarIndex) for o in self.offsets)


@dataclass(frozen=True)
class Const:
    value: Union[str, int]

    def __str__(self) -> str:
        return _const_text(self.value)


@dataclass(frozen=True)
class New:
    cls: str
    label: str

    def __str__(self) -> str:
        return f"new {self.cls}@{self.label}"


RValue = Union[LValue, Const, New]


@dataclass(frozen=True)
class Assign:
    lhs: LValue
    rhs: RValue

    def __str__(self) -> str:
        return f"{self.lhs} = {self.rhs};"

    def variables(self) -> set[str]:
        out = self.lhs.variables()
        if isinstance(self.rhs, LValue):
            out |= self.rhs.variables()
        return out


@dataclass(frozen=True)
class Call:
    result: LValue | None
    callee: str
    args: tuple
    kind: str  # "virtual" | "static"

    def __str__(self) -> str:
        kw = "vcall" if self.kind == "virtual" else "scall"
        head = f"{self.result} = " if self.result is not None else ""
        return f"{head}{kw} {self.callee}({', '.join(map(str, self.args))});"

    @property
    def is_virtual(self) -> bool:
        return self.kind == "virtual"

    def variables(self) -> set[str]:
        out: set[str] = set()
        if self.result is not None:
            out |= self.result.variables()
        for a in self.args:
            out |= a.variables()
        return out


Statement = Union[Assign, Call]


@dataclass(frozen=True)
class ClassDecl:
    name: str
    supers: tuple = ()
    methods: tuple = ()  # sorted (method name, proc id) pairs
    abstract: frozenset = frozenset()

    @property
    def method_table(self) -> dict[str, str]:
        return dict(self.methods)


@dataclass(frozen=True)
class Procedure:
    id: str
    params: tuple
    body: tuple

    def locals(self) -> set[str]:
        """Variables assigned somewhere in the body, parameters excluded."""
        out: set[str] = set()
        for s in self.body:
            lv = s.lhs if isinstance(s, Assign) else s.result
            if lv is not None and not lv.offsets:
                out.add(lv.base)
        return out - set(self.params)


@dataclass(frozen=True)
class AliasAssertion:
    proc: str
    kind: str  # "alias" | "noalias"
    vars: tuple
    expected: str  # "pass" | "fail"

    @property
    def truly_aliased(self) -> bool:
        """Ground truth: do the two variables alias at run time."""
        return (self.kind == "alias") == (self.expected == "pass")


@dataclass
class Program:
    classes: list = field(default_factory=list)
    procs: dict = field(default_factory=dict)
    roots: list = field(default_factory=list)
    assertions: list = field(default_factory=list)

    def __post_init__(self) -> None:
        self._class_index = {c.name: c for c in self.classes}
        self._impl_cache: dict = {}

    def cls(self, name: str) -> ClassDecl:
        return self._class_index[name]

    def structurally_equal(self, other: "Program") -> bool:
        return (
            sorted(self.classes, key=lambda c: c.name)
            == sorted(other.classes, key=lambda c: c.name)
            and {k: _proc_key(p) for k, p in self.procs.items()}
            == {k: _proc_key(p) for k, p in other.procs.items()}
            and self.roots == other.roots
            and self.assertions == other.assertions
        )


def _proc_key(p: Procedure):
    return (p.id, p.params, frozenset(p.body))


def _const_text(v) -> str:
    if isinstance(v, int):
        return str(v)
    return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'


# -------------------------------------------------------------- dispatch


def _linearize(program: Program, cname: str) -> list[str]:
    order, seen, todo = [], set(), [cname]
    while todo:
        c = todo.pop(0)
        if c in seen or c not in program._class_index:
            continue
        seen.add(c)
        order.append(c)
        todo.extend(program._class_index[c].supers)
    return order


def implementations(program: Program, method: str) -> frozenset:
    """Every procedure bound to ``method`` by some class."""
    hit = program._impl_cache.get(method)
    if hit is None:
        hit = frozenset(
            pid for c in program.classes
            for m, pid in c.methods if m == method
        )
        program._impl_cache[method] = hit
    return hit


def dispatch_targets(program: Program, method: str, receiver_classes) -> frozenset:
    """Implementations of ``method`` selected for the given receiver classes.

    ``TOP_CLASSES`` yields every implementation.  A class with no binding on
    its supers chain contributes nothing.
    """
    if receiver_classes is TOP_CLASSES:
        return implementations(program, method)
    out = set()
    for cname in receiver_classes:
        for c in _linearize(program, cname):
            decl = program._class_index[c]
            if method in decl.abstract:
                continue
            table = decl.method_table
            if method in table:
                out.add(table[method])
                break
    return frozenset(out)


# ----------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<int>-?\d+)
  | (?P<name>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<punct>[{}()\[\];,.=:@])
    """,
    re.VERBOSE,
)

_KEYWORDS = {
    "class", "method", "abstract", "proc", "vcall", "scall", "return",
    "new", "root", "assert", "alias", "noalias", "expect", "pass", "fail",
}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> list[_Tok]:
    toks, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, col))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str):
        raise ParseError(msg, self.tok.line, self.tok.col)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("punct", "name")

    def eat(self, text: str) -> _Tok:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def name(self) -> str:
        if self.tok.kind != "name" or self.tok.text in _KEYWORDS:
            self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t.text

    def const(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return int(t.text)
        if t.kind == "string":
            self.i += 1
            return bytes(t.text[1:-1], "utf-8").decode("unicode_escape")
        self.error("expected constant")

    # program := (classdecl | procdecl | rootdecl | assertdecl)*
    def program(self) -> Program:
        classes, procs, roots, asserts = [], {}, [], []
        while self.tok.kind != "eof":
            if self.at("class"):
                classes.append(self.classdecl())
            elif self.at("proc"):
                start = self.tok
                p = self.procdecl()
                if p.id in procs:
                    raise ParseError(f"duplicate procedure {p.id!r}", start.line, start.col)
                procs[p.id] = p
            elif self.at("root"):
                self.eat("root")
                roots.append(self.name())
                self.eat(";")
            elif self.at("assert"):
                asserts.append(self.assertdecl())
            else:
                self.error(f"unexpected {self.tok.text!r} at top level")
        return Program(classes, procs, roots, asserts)

    def classdecl(self) -> ClassDecl:
        self.eat("class")
        name = self.name()
        supers = []
        if self.at(":"):
            self.eat(":")
            supers.append(self.name())
            while self.at(","):
                self.eat(",")
                supers.append(self.name())
        self.eat("{")
        methods, abstract = {}, set()
        while not self.at("}"):
            if self.at("method"):
                self.eat("method")
                m = self.name()
                self.eat("=")
                methods[m] = self.name()
                self.eat(";")
            elif self.at("abstract"):
                self.eat("abstract")
                abstract.add(self.name())
                self.eat(";")
            else:
                self.error("expected 'method' or 'abstract'")
        self.eat("}")
        return ClassDecl(name, tuple(supers), tuple(sorted(methods.items())), frozenset(abstract))

    def procdecl(self) -> Procedure:
        self.eat("proc")
        pid = self.name()
        self.eat("(")
        params = []
        if not self.at(")"):
            params.append(self.name())
            while self.at(","):
                self.eat(",")
                params.append(self.name())
        self.eat(")")
        self.eat("{")
        body = []
        while not self.at("}"):
            body.append(self.stmt())
        self.eat("}")
        # flow-insensitive: duplicates carry no meaning
        return Procedure(pid, tuple(params), tuple(dict.fromkeys(body)))

    def stmt(self) -> Statement:
        if self.at("return"):
            self.eat("return")
            lv = self.lv()
            self.eat(";")
            return Assign(LValue(RET), lv)
        if self.at("vcall") or self.at("scall"):
            return self.call(None)
        lhs = self.lv()
        self.eat("=")
        if self.at("vcall") or self.at("scall"):
            return self.call(lhs)
        if self.at("new"):
            self.eat("new")
            cls = self.name()
            self.eat("@")
            t = self.tok
            if t.kind not in ("name", "int"):
                self.error("expected allocation label")
            self.i += 1
            self.eat(";")
            return Assign(lhs, New(cls, t.text))
        if self.tok.kind in ("int", "string"):
            c = self.const()
            self.eat(";")
            return Assign(lhs, Const(c))
        rhs = self.lv()
        self.eat(";")
        return Assign(lhs, rhs)

    def call(self, result) -> Call:
        virtual = self.at("vcall")
        self.i += 1
        callee = self.name()
        self.eat("(")
        args = []
        if not self.at(")"):
            args.append(self.lv())
            while self.at(","):
                self.eat(",")
                args.append(self.lv())
        self.eat(")")
        if virtual and not args:
            self.error("virtual call needs a receiver argument")
        self.eat(";")
        return Call(result, callee, tuple(args), "virtual" if virtual else "static")

    def lv(self) -> LValue:
        base = self.name()
        offs = []
        while self.at(".") or self.at("["):
            if self.at("."):
                self.eat(".")
                offs.append(Field(self.name()))
            else:
                self.eat("[")
                if self.tok.kind in ("int", "string"):
                    offs.append(ConstIndex(self.const()))
                else:
                    offs.append(VarIndex(self.name()))
                self.eat("]")
        return LValue(base, tuple(offs))

    def assertdecl(self) -> AliasAssertion:
        self.eat("assert")
        if self.at("alias"):
            kind = "alias"
        elif self.at("noalias"):
            kind = "noalias"
        else:
            self.error("expected 'alias' or 'noalias'")
        self.i += 1
        p1 = self.name()
        self.eat(".")
        v1 = self.name()
        self.eat(",")
        p2 = self.name()
        self.eat(".")
        v2 = self.name()
        self.eat("expect")
        if not (self.at("pass") or self.at("fail")):
            self.error("expected 'pass' or 'fail'")
        expected = self.tok.text
        self.i += 1
        self.eat(";")
        if p1 != p2:
            self.error("both asserted variables must belong to one procedure")
        return AliasAssertion(p1, kind, (v1, v2), expected)


# ------------------------------------------------------------ validation


def _validate(program: Program) -> None:
    names = [c.name for c in program.classes]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise IRError(f"duplicate class {sorted(dup)[0]!r}")

    # supers cycle via DFS colouring
    colour: dict[str, int] = {}

    def visit(c: str, trail: list[str]) -> None:
        colour[c] = 1
        for s in program._class_index[c].supers:
            if s not in program._class_index:
                raise IRError(f"class {c!r} extends undeclared {s!r}")
            if colour.get(s) == 1:
                raise SupersCycleError(" -> ".join(trail + [c, s]))
            if s not in colour:
                visit(s, trail + [c])
        colour[c] = 2

    for c in names:
        if c not in colour:
            visit(c, [])

    for c in program.classes:
        for m, pid in c.methods:
            if pid not in program.procs:
                raise UnresolvedMethodError(f"class {c.name!r} binds {m!r} to unknown procedure {pid!r}")
            if m in c.abstract:
                raise IRError(f"class {c.name!r} declares {m!r} both abstract and bound")

    labels: dict[str, str] = {}
    for p in program.procs.values():
        scope = set(p.params) | p.locals() | {GLOBAL, RET}
        for s in p.body:
            for v in sorted(s.variables()):
                if v not in scope:
                    raise UndefinedVariableError(f"{p.id}: variable {v!r} is never assigned")
            if isinstance(s, Assign) and isinstance(s.rhs, New):
                if s.rhs.label in labels:
                    raise DuplicateLabelError(
                        f"allocation label {s.rhs.label!r} used in {labels[s.rhs.label]!r} and {p.id!r}")
                labels[s.rhs.label] = p.id
                if s.rhs.cls not in program._class_index:
                    raise IRError(f"{p.id}: allocation of undeclared class {s.rhs.cls!r}")
            if isinstance(s, Call):
                if s.is_virtual:
                    if not implementations(program, s.callee):
                        raise UnresolvedMethodError(f"{p.id}: no implementation of method {s.callee!r}")
                elif s.callee not in program.procs:
                    raise UnresolvedMethodError(f"{p.id}: call to undeclared procedure {s.callee!r}")

    for r in program.roots:
        if r not in program.procs:
            raise UnresolvedMethodError(f"root {r!r} is not a procedure")
    for a in program.assertions:
        if a.proc not in program.procs:
            raise UnresolvedMethodError(f"assertion names unknown procedure {a.proc!r}")
        proc = program.procs[a.proc]
        scope = set(proc.params) | proc.locals() | {RET}
        for v in a.vars:
            if v not in scope:
                raise UndefinedVariableError(f"assertion variable {a.proc}.{v} is not in scope")


def parse(text: str) -> Program:
    """Parse and validate IR source text."""
    program = _Parser(text).program()
    _validate(program)
    return program


# --------------------------------------------------------------- printer


def pretty(program: Program) -> str:
    out: list[str] = []
    for c in program.classes:
        sup = f" : {', '.join(c.supers)}" if c.supers else ""
        members = [f"method {m} = {pid};" for m, pid in c.methods]
        members += [f"abstract {m};" for m in sorted(c.abstract)]
        out.append(f"class {c.name}{sup} {{ {' '.join(members)} }}".replace("{  }", "{ }"))
    for p in program.procs.values():
        out.append(f"proc {p.id}({', '.join(p.params)}) {{")
        out.extend(f"  {s}" for s in p.body)
        out.append("}")
    out.extend(f"root {r};" for r in program.roots)
    for a in program.assertions:
        v1, v2 = a.vars
        out.append(f"assert {a.kind} {a.proc}.{v1}, {a.proc}.{v2} expect {a.expected};")
    return "\n".join(out) + "\n"


def statements(procs: Iterable[Procedure]):
    for p in procs:
        yield from p.body
