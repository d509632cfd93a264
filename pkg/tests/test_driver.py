import pytest

from hybridpta import parse
from hybridpta.driver import (
    Frame, FuelExhausted, analyze, permutation_guard, recursion_unroll, unique_instance,
)
from hybridpta.heapstate import TOP, AllocSite
from hybridpta.inline import Config

from conftest import load


def test_recursion_unroll_plan():
    st = [Frame("main"), Frame("r")]
    assert recursion_unroll(st, "q", 2) == "inline"
    assert recursion_unroll(st, "r", 2) == "copy"
    assert recursion_unroll(st + [Frame("r")], "r", 2) == "base"
    assert recursion_unroll(st, "r", 1) == "base"


def test_permutation_guard():
    st = [Frame("main"), Frame("a", witness="step")]
    assert permutation_guard(st, "step", 6, 5) == 1
    assert permutation_guard(st, "step", 5, 5) is None
    assert permutation_guard(st, "other", 6, 5) is None
    assert permutation_guard(st, None, 9, 5) is None


def test_overview_call_strings(overview):
    hia = analyze(overview, Config.from_mode("hia"))
    ends = {c[1:] for c in hia.call_strings("service") if c[-1].startswith("poly")}
    assert ends == {("bar1", "mid", "foo", "poly_Y"), ("bar2", "mid", "foo", "poly_Z")}
    com = analyze(overview, Config.from_mode("comci"))
    polys = {c[-1] for c in com.call_strings("service") if c[-1].startswith("poly")}
    assert polys == {"poly_Y", "poly_Z"}
    assert {t for _, t in hia.call_edges()} >= {"poly_Y", "poly_Z", "bar1", "bar2"}


def test_overview_metrics(overview):
    hia = analyze(overview).metrics
    com = analyze(overview, Config.from_mode("comci")).metrics
    assert (hia.poly_callsites, hia.critical_total, hia.critical_propagated, hia.k_max) == (0, 1, 1, 2)
    assert (com.poly_callsites, com.critical_propagated, com.k_max) == (1, 0, 0)
    assert hia.reached_procs == com.reached_procs == 8
    assert hia.consistent() and com.consistent()


def test_summaries_cached_once_without_recursion(overview):
    from hybridpta.driver import Analyzer

    an = Analyzer(overview, Config())
    an.run_root("service")
    assert max(an.passes.values()) == 1


def test_self_recursion_terminates_with_base_case():
    res = analyze(load("stress/selfRecursiveIdentity.hir"))
    b = res.facts()[("main", "b")]
    assert TOP in b and any(isinstance(v, AllocSite) and v.label == "1" for v in b)


def test_fuel_exhaustion_is_reported(overview):
    with pytest.raises(FuelExhausted):
        analyze(overview, Config(fuel=3))


def test_unique_instance():
    p = load("returnValue/returnValue1.hir")
    res = analyze(p)
    sol = res.root_states["main"]
    made = next(iter(res.facts()[("main", "a")]))
    d = next(iter(res.facts()[("main", "d")]))
    assert not unique_instance(sol, made)   # make() runs twice
    assert unique_instance(sol, d)


def test_all_procs_summarizes_unreachable():
    p = parse("proc lost(x) { y = x; return y; } proc main() { } root main;")
    assert "lost" not in analyze(p).summaries
    res = analyze(p, Config(all_procs=True))
    assert "lost" in res.summaries and res.metrics.reached_procs == 2


def test_deterministic_results(overview):
    a, b = analyze(overview), analyze(overview)
    assert a.facts() == b.facts()
    assert [s.dump() for s in a.summaries.values()] == [s.dump() for s in b.summaries.values()]
