from hybridpta.heapstate import (
    PI, STAR, TOP, AbstractState, AccessPath, AllocSite, Constraint, ConstVal,
    FieldOff, IndexOff, Local, Param, Ret, Sym, cleanup, closed_paths, extend, solve,
)

P = "p"


def v(name):
    return AccessPath(Local(name, P))


def obj(label):
    return AllocSite(label, "A", ())


def f(path, name):
    return AccessPath(path.root, path.offsets + (FieldOff(name),))


def ix(path, key):
    return AccessPath(path.root, path.offsets + (key if key is PI else IndexOff(key),))


def test_copy_chain():
    sol = solve([Constraint(v("x"), obj("1")), Constraint(v("y"), v("x")),
                 Constraint(v("z"), v("y"))])
    assert sol.pt(v("z")) == {obj("1")}


def test_store_then_load():
    cs = [Constraint(v("x"), obj("1")), Constraint(v("y"), obj("2")),
          Constraint(f(v("x"), "f"), v("y")), Constraint(v("z"), f(v("x"), "f")),
          Constraint(v("w"), f(v("x"), "g"))]
    sol = solve(cs)
    assert sol.pt(v("z")) == {obj("2")}
    assert sol.pt(v("w")) == frozenset()


def test_load_through_alias():
    cs = [Constraint(v("x"), obj("1")), Constraint(v("a"), v("x")),
          Constraint(f(v("a"), "f"), obj("2")), Constraint(v("z"), f(v("x"), "f"))]
    assert solve(cs).pt(v("z")) == {obj("2")}


def test_parameters_are_symbolic():
    par = AccessPath(Param(0, P))
    sol = solve([Constraint(v("x"), par), Constraint(v("y"), f(v("x"), "f"))])
    assert sol.pt(v("x")) == {Sym(par)}
    assert sol.pt(v("y")) == {Sym(f(par, "f"))}


def test_index_cells():
    # x[c1] ⊇ a, x[π] ⊇ b: a constant read sees its own cell and π; π sees all
    cs = [Constraint(v("x"), obj("m")), Constraint(ix(v("x"), "c1"), obj("a")),
          Constraint(ix(v("x"), PI), obj("b")),
          Constraint(v("r1"), ix(v("x"), "c1")), Constraint(v("r2"), ix(v("x"), "c2")),
          Constraint(v("r3"), ix(v("x"), PI))]
    sol = solve(cs)
    assert sol.pt(v("r1")) == {obj("a"), obj("b")}
    assert sol.pt(v("r2")) == {obj("b")}
    assert sol.pt(v("r3")) == {obj("a"), obj("b")}


def test_field_and_index_do_not_mix():
    cs = [Constraint(v("x"), obj("m")), Constraint(f(v("x"), "k"), obj("a")),
          Constraint(v("r"), ix(v("x"), "k"))]
    assert solve(cs).pt(v("r")) == frozenset()


def test_constants_are_values():
    cs = [Constraint(v("k"), ConstVal("cur")), Constraint(v("j"), v("k"))]
    assert solve(cs).pt(v("j")) == {ConstVal("cur")}


def test_top_reads_give_top():
    cs = [Constraint(v("x"), TOP), Constraint(v("y"), f(v("x"), "f"))]
    assert TOP in solve(cs).pt(v("y"))


def test_extend_widens_at_depth():
    p = AccessPath(Local("x", P))
    for _ in range(3):
        p, widened = extend(p, FieldOff("f"), 3)
        assert not widened
    p2, widened = extend(p, FieldOff("f"), 3)
    assert widened and p2.offsets[-1] is STAR and len(p2.offsets) == 3
    assert extend(p2, FieldOff("g"), 3) == (p2, False)


def test_cleanup_pointer_foo():
    # foo(u, v, x) { v.f = x; return u.f; }  ->  ret ⊇ par1.f, par2.f ⊇ par3
    pars = [AccessPath(Param(i, "foo")) for i in range(3)]
    loc = {n: AccessPath(Local(n, "foo")) for n in "uvx"}
    cs = [Constraint(loc["u"], pars[0]), Constraint(loc["v"], pars[1]),
          Constraint(loc["x"], pars[2]), Constraint(f(loc["v"], "f"), loc["x"]),
          Constraint(AccessPath(Ret("foo")), f(loc["u"], "f"))]
    out = cleanup(solve(cs), {Ret("foo")}, ())
    assert sorted(map(str, out)) == ["par2@foo.f ⊇ par3@foo", "ret@foo ⊇ par1@foo.f"]


def test_cleanup_drops_local_allocation_paths():
    # getNew-like: o = new; o.f = new; ret = o.f  -> only the field object escapes
    o, i = obj("6"), obj("14")
    cs = [Constraint(v("o"), o), Constraint(v("i"), i), Constraint(f(v("o"), "f"), v("i")),
          Constraint(AccessPath(Ret(P)), f(v("o"), "f"))]
    out = cleanup(solve(cs), {Ret(P)}, ())
    assert out == {Constraint(AccessPath(Ret(P)), i)}


def test_closed_paths_marks_parameter_dependence():
    par = AccessPath(Param(0, P))
    cs = [Constraint(v("k"), par), Constraint(v("c"), ConstVal("cur"))]
    sol = closed_paths(cs, 6, set(), set())
    assert any(not isinstance(x, ConstVal) for x in sol.pt(v("k")))
    assert sol.pt(v("c")) == {ConstVal("cur")}


def test_abstract_state_add_and_join():
    a = AbstractState()
    assert a.add([Constraint(v("x"), obj("1"))])
    assert not a.add([Constraint(v("x"), obj("1"))])
    b = AbstractState({Constraint(v("y"), v("x"))})
    j = a.join(b)
    assert j.pt(v("y")) == {obj("1")}
    assert a.pt(v("y")) == frozenset()
