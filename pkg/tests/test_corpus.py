import pytest

from hybridpta import ir
from hybridpta.corpus import (
    GenParams, generate, has_cycle, load_corpus, permutation_program,
)

TABLE1 = {
    "branching", "interprocedural", "loops", "parameter", "recursion", "returnValue",
    "simpleAlias", "array", "list", "map", "set", "accessPath", "fieldSensitivity",
    "contextSensitivity", "flowSensitivity", "objectSensitivity", "strongUpdate",
    "exception", "interface", "null", "outerClass", "staticVariable", "superClass",
    "overviewExample",
}


def test_every_category_is_ported():
    entries = load_corpus()
    cats = {e.category for e in entries}
    assert TABLE1 <= cats
    for e in entries:
        if e.category in TABLE1:
            assert e.program.assertions, e.path
            assert "Table 1 row" in e.path.read_text().splitlines()[0], e.path


def test_recursive_flag():
    by_name = {e.name: e for e in load_corpus()}
    assert by_name["selfRecursiveIdentity"].recursive
    assert by_name["recursion1"].recursive
    assert not by_name["overview"].recursive


def test_minimal_generation():
    p = generate(0, GenParams.minimal())
    assert list(p.procs) == ["main"] and p.roots == ["main"]
    assert not p.procs["main"].body


def test_generation_is_deterministic():
    assert ir.pretty(generate(7)) == ir.pretty(generate(7))
    assert ir.pretty(generate(7)) != ir.pretty(generate(8))


@pytest.mark.parametrize("seed", range(40))
def test_generated_programs_roundtrip_and_are_acyclic(seed):
    p = generate(seed, GenParams(root_params=seed % 3, roots=1 + seed % 2))
    assert p.structurally_equal(ir.parse(ir.pretty(p)))
    assert not has_cycle(p)
    assert len(p.procs) <= 12


def test_generator_bounds():
    with pytest.raises(ValueError):
        GenParams(max_procs=13)
    with pytest.raises(ValueError):
        GenParams(max_depth=6)
    with pytest.raises(ValueError):
        GenParams(width=5)


def test_generator_exercises_all_forms():
    seen = set()
    for seed in range(60):
        for proc in generate(seed).procs.values():
            for s in proc.body:
                if isinstance(s, ir.Call):
                    seen.add("vcall" if s.is_virtual else "scall")
                elif isinstance(s.rhs, ir.New):
                    seen.add("new")
                elif isinstance(s.rhs, ir.Const):
                    seen.add("const")
                else:
                    if s.lhs.offsets:
                        seen.add("store")
                    if s.rhs.offsets:
                        seen.add("load")
                    if s.lhs.has_var_index or s.rhs.has_var_index:
                        seen.add("varindex")
                    if s.lhs.base == ir.GLOBAL or s.rhs.base == ir.GLOBAL:
                        seen.add("global")
    assert seen >= {"vcall", "scall", "new", "const", "store", "load", "varindex", "global"}


def test_permutation_program_shape():
    p = ir.parse(permutation_program(3))
    assert ir.implementations(p, "step") == {"step_C1", "step_C2", "step_C3"}
    assert has_cycle(p)
