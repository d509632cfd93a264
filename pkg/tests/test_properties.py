import random

from hypothesis import given, strategies as st

from hybridpta import ir
from hybridpta.corpus import GenParams, generate
from hybridpta.driver import analyze
from hybridpta.heapstate import (
    PI, AccessPath, AllocSite, Constraint, ConstVal, FieldOff, IndexOff, Local, Param, solve,
)
from hybridpta.inline import Config
from hybridpta.ir import TOP_CLASSES, dispatch_targets
from hybridpta.summarize import HybridSummary, join

# ------------------------------------------------------------- strategies

VARS = [AccessPath(Local(f"x{i}", "p")) for i in range(5)]
VALUES = [AllocSite(f"{i}", "A", ()) for i in range(3)] + [ConstVal("k")]
OFFS = [FieldOff("f"), FieldOff("g"), IndexOff("a"), IndexOff("b"), PI]
SOURCES = VARS + [AccessPath(Param(0, "p"))]

var = st.sampled_from(VARS)
off = st.sampled_from(OFFS)


def _with(path, o):
    return AccessPath(path.root, path.offsets + (o,))


constraint = st.one_of(
    st.builds(Constraint, var, st.sampled_from(VALUES)),
    st.builds(Constraint, var, st.sampled_from(SOURCES)),
    st.builds(lambda a, o, b: Constraint(_with(a, o), b), var, off, var),
    st.builds(lambda a, b, o: Constraint(a, _with(b, o)), var, st.sampled_from(SOURCES), off),
)
constraints = st.lists(constraint, max_size=14).map(lambda cs: [c for c in cs if c.lhs != c.rhs])

gen_params = st.builds(
    GenParams,
    max_procs=st.integers(2, 12), max_depth=st.integers(1, 5), width=st.integers(1, 4),
    max_stmts=st.integers(1, 7), methods=st.integers(0, 3), roots=st.integers(1, 2),
    root_params=st.integers(0, 2),
)


# Cyclic loads through a parameter enumerate every symbolic path up to the
# depth bound, which grows exponentially; a small bound keeps examples fast
# and still exercises widening.
DEPTH = 3


def facts_of(cs, probes=VARS):
    sol = solve(cs, DEPTH)
    out = {}
    for v in probes:
        out[str(v)] = sol.pt(v)
        for o in OFFS:
            out[str(_with(v, o))] = sol.pt(_with(v, o))
    return out


# ------------------------------------------------------------------- ir


@given(st.integers(0, 10**6), gen_params)
def test_roundtrip(seed, params):
    p = generate(seed, params)
    assert p.structurally_equal(ir.parse(ir.pretty(p)))


@given(st.integers(0, 10**6), st.data())
def test_dispatch_monotone(seed, data):
    p = generate(seed)
    names = sorted(c.name for c in p.classes)
    big = data.draw(st.sets(st.sampled_from(names)))
    small = data.draw(st.sets(st.sampled_from(sorted(big)))) if big else set()
    methods = sorted({m for c in p.classes for m, _ in c.methods} | {"none"})
    for m in methods:
        assert dispatch_targets(p, m, small) <= dispatch_targets(p, m, big)
        assert dispatch_targets(p, m, TOP_CLASSES) == dispatch_targets(p, m, set(names))


# ---------------------------------------------------------------- solver


@given(constraints)
def test_solve_idempotent(cs):
    assert facts_of(cs) == facts_of(cs + cs)


@given(constraints, constraints)
def test_solve_monotone(a, b):
    small, big = facts_of(a), facts_of(a + b)
    for k in small:
        assert small[k] <= big[k]


@given(constraints, st.randoms(use_true_random=False))
def test_solve_order_independent(cs, rnd):
    from hybridpta.heapstate import Solution

    shuffled = list(cs)
    rnd.shuffle(shuffled)
    incremental = Solution(DEPTH)
    for c in shuffled:
        incremental.add(c)
    batch = solve(cs, DEPTH)
    for v in VARS:
        assert incremental.pt(v) == batch.pt(v)


# -------------------------------------------------------------- summaries


summaries = st.builds(
    lambda cs, pend: HybridSummary("p", frozenset(cs), tuple(pend)),
    constraints, st.lists(st.sampled_from(["s1", "s2", "s3"]), unique=True).map(sorted),
)


@given(summaries, summaries, summaries)
def test_join_laws(a, b, c):
    key = lambda s: (s.delta, tuple(sorted(map(str, s.pending))))
    assert key(join(a, b)) == key(join(b, a))
    assert key(join(join(a, b), c)) == key(join(a, join(b, c)))
    assert key(join(a, a)) == key(a)


# -------------------------------------------------------------- analysis


def _shuffle_bodies(p: ir.Program, seed: int) -> ir.Program:
    rnd = random.Random(seed)
    text = []
    for line in ir.pretty(p).splitlines():
        text.append(line)
    out, body = [], []
    for line in text:
        if line.startswith("  "):
            body.append(line)
            continue
        if body:
            rnd.shuffle(body)
            out += body
            body = []
        out.append(line)
    out += body
    return ir.parse("\n".join(out) + "\n")


@given(st.integers(0, 10**6), st.integers(0, 100))
def test_statement_order_irrelevant(seed, salt):
    p = generate(seed, GenParams(root_params=1))
    q = _shuffle_bodies(p, salt)
    for mode in ("hia", "comci"):
        assert analyze(p, Config.from_mode(mode)).facts() == analyze(q, Config.from_mode(mode)).facts()


@given(st.integers(0, 10**6))
def test_precision_chain(seed):
    from hybridpta.oracle import cover_violations

    p = generate(seed, GenParams(root_params=seed % 2))
    prev = None
    for mode in ("comci", "hi:1", "hi:2", "hi:3", "hia"):
        f = analyze(p, Config.from_mode(mode)).facts()
        if prev is not None:
            assert not cover_violations(prev, f), mode
        prev = f
