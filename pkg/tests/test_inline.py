import pytest

from hybridpta.cli import mark, run_mode
from hybridpta.driver import analyze
from hybridpta.heapstate import AccessPath, AllocSite, Constraint, Local, Param, Ret, solve
from hybridpta.inline import Config, instantiate, rename_root
from hybridpta.summarize import HybridSummary

from conftest import load


def test_config_from_mode():
    assert Config.from_mode("hia").step_limit is None
    assert Config.from_mode("comci").step_limit == 0
    c = Config.from_mode("hi:2", depth=4)
    assert (c.mode, c.k, c.depth, c.label) == ("hik", 2, 4, "HI2")
    with pytest.raises(ValueError):
        Config.from_mode("bogus")
    with pytest.raises(ValueError):
        Config(unroll=0)


def test_rename_root():
    pre = (("s1", "foo"),)
    assert rename_root(Param(1, "foo"), "foo", pre) == Local("$a1", "foo", pre)
    assert rename_root(Ret("foo"), "foo", pre) == Local("$ret", "foo", pre)
    assert rename_root(Local("t", "id", (("s0", "id"),)), "foo", pre) == \
        Local("t", "id", pre + (("s0", "id"),))


def test_instantiate_copies_allocations_per_site():
    o = AllocSite("6", "Obj", ())
    summ = HybridSummary("getNew", frozenset({Constraint(AccessPath(Ret("getNew")), o)}), ())
    r1, r2 = AccessPath(Local("u", "bar2")), AccessPath(Local("v", "bar2"))
    c1, _ = instantiate(summ, "getNew", (("s1", "getNew"),), [], r1, 0)
    c2, _ = instantiate(summ, "getNew", (("s2", "getNew"),), [], r2, 0)
    sol = solve(c1 | c2)
    assert sol.pt(r1) != sol.pt(r2)
    assert {v.label for v in sol.pt(r1) | sol.pt(r2)} == {"6"}


def test_instantiate_binds_arguments_and_result():
    foo = analyze(load("workedExamples/pointer.hir")).summaries["foo"]
    caller = lambda n: AccessPath(Local(n, "bar1"))
    cs, crits = instantiate(foo, "foo", (("s", "foo"),), [caller("u"), caller("v"), caller("x")],
                            caller("r"), 3)
    text = sorted(map(str, cs))
    assert any(t.startswith("$a0@foo") and t.endswith("⊇ u@bar1") for t in text)
    assert any(t.startswith("r@bar1 ⊇ $ret@foo") for t in text)
    assert crits == []


def _marks(mode, rel="contextSensitivity/contextSensitivity1.hir"):
    p = load(rel)
    run = run_mode(p, mode, {})
    ms = [mark(run.states[a.proc], p, a) for a in p.assertions]
    return ms.count("tp"), ms.count("fp")


@pytest.mark.parametrize("mode, fps", [("comci", 3), ("hi:1", 2), ("hi:2", 1), ("hi:3", 0), ("hia", 0)])
def test_k_limit_depth(mode, fps):
    # the dispatch sits 1, 2 and 3 calls below its receiver's allocation;
    # HIk fixes exactly the chains of length <= k
    assert _marks(mode) == (6, fps)


VISITOR = """
class Obj { }
class S { abstract apply; }
class Keep : S { method apply = keep; }
class Fresh : S { method apply = fresh; }
class H { method h1 = H_h1; method h2 = H_h2; method h3 = H_h3; }
proc keep(this, x) { return x; }
proc fresh(this, x) { o = new Obj@1; return o; }
proc H_h1(this, s, x) { r = vcall apply(s, x); return r; }
proc H_h2(this, s, x) { r = vcall h1(this, s, x); return r; }
proc H_h3(this, s, x) { r = vcall h2(this, s, x); return r; }
proc main() {
  h = new H@2; k = new Keep@3; a = new Obj@4;
  r = vcall h3(h, k, a);
}
root main;
"""


def test_opt1_forces_hot_statements():
    from hybridpta import parse

    p = parse(VISITOR)
    hot = analyze(p, Config(opt1_threshold=0, opt1_k=1))
    cold = analyze(p, Config(opt1=False))
    assert cold.metrics.k_max == 3
    assert hot.metrics.k_max == 1
    assert len(cold.facts()[("main", "r")]) == 1
    assert cold.facts()[("main", "r")] < hot.facts()[("main", "r")]


def test_pending_cap_forces_and_warns():
    p = load("contextSensitivity/contextSensitivity1.hir")
    res = analyze(p, Config(pending_cap=0))
    assert any("pending cap" in d for d in res.diagnostics)
    full = analyze(p)
    for key, vals in full.facts().items():
        assert vals <= res.facts()[key]   # forcing early only loses precision
