import itertools

import pytest
from hypothesis import given, settings, strategies as st

from abscase.domain import (
    GoalNotReached,
    Operator,
    OperatorNotApplicable,
    OperatorSchema,
    PlanningCase,
    Problem,
    SchemaError,
    State,
    applicable_instantiations,
    apply,
    execute_plan,
    goal_satisfied,
    instantiate,
    resolve_plan,
)
from abscase.lathe import FIGURE9_PLAN, figure9_fixture
from abscase.logic import Var, provable


def bits(b1, b2, b3):
    return State({("val", "e1", b1), ("val", "e2", b2), ("val", "e3", b3)})


ALL_CUBE = [bits(*b) for b in itertools.product((0, 1), repeat=3)]


def test_instantiate_inc(counting):
    op = instantiate(counting.concrete.operator("inc"), (3,))
    assert op.pre[0] == ("value", 3)
    assert op.delete == {("value", 3)}
    assert op.add == {("value", 4)}


def test_instantiate_cut(lathe_domains):
    op = instantiate(lathe_domains[0].operator("cut"), (4, 2))
    assert op.delete == {("mat", 4, 2, "raw")}
    assert op.add == {("mat", 4, 2, "none")}


def test_instantiate_zero_params(cube):
    schema = cube.concrete.operator("add_e1")
    op = instantiate(schema, ())
    assert op.pre == schema.pre and op.add == frozenset(schema.add)


def test_instantiate_errors(counting):
    inc = counting.concrete.operator("inc")
    with pytest.raises(SchemaError):
        instantiate(inc, (1, 2, 3))
    with pytest.raises(SchemaError):
        instantiate(inc, (Var("X"),))


def test_applicable_counting(counting):
    ops = applicable_instantiations(State({("value", 5)}), counting.concrete.operator("inc"), counting.concrete.program)
    assert [op.args for op in ops] == [(5, 6)]


def test_applicable_cube_del_e3(cube):
    d = cube.concrete
    assert applicable_instantiations(bits(1, 1, 0), d.operator("del_e3"), d.program) == []
    [op] = applicable_instantiations(bits(1, 1, 1), d.operator("del_e3"), d.program)
    assert op.name == "del_e3"


def test_cube_guards_match_truth_conditions(cube):
    d = cube.concrete
    for s in ALL_CUBE:
        e = {k: next(v for (_, n, v) in s if n == k) for k in ("e1", "e2", "e3")}
        allowed = {"e1": e["e2"] != e["e3"], "e2": e["e1"] == e["e3"], "e3": bool(e["e1"] or e["e2"])}
        for bit, ok in allowed.items():
            name = ("del_" if e[bit] else "add_") + bit
            assert bool(applicable_instantiations(s, d.operator(name), d.program)) == ok


def test_applicable_agrees_with_brute_force(lathe_domains):
    concrete = lathe_domains[0]
    case = figure9_fixture(concrete)
    states = execute_plan(case, concrete)
    consts = sorted({t for s in states[:4] for a in s for t in a[1:]}, key=str)
    for s in states[:4]:
        for schema in concrete.operators:
            got = {op.args for op in applicable_instantiations(s, schema, concrete.program)}
            if schema.name != "cut":
                continue
            want = {(x, y) for x, y in itertools.product([c for c in consts if isinstance(c, int)], repeat=2)
                    if provable(concrete.program, list(instantiate(schema, (x, y)).pre), facts=s)}
            assert got == want


def test_apply_examples(counting, cube):
    inc0 = instantiate(counting.concrete.operator("inc"), (0,))
    assert apply(State({("value", 0)}), inc0) == {("value", 1)}
    add_e2 = instantiate(cube.concrete.operator("add_e2"), ())
    assert apply(bits(0, 0, 0), add_e2) == bits(0, 1, 0)
    noop = Operator("noop")
    assert apply(bits(1, 0, 1), noop) == bits(1, 0, 1)


def test_add_wins_over_delete():
    op = Operator("flip", (), (), frozenset({("p",)}), frozenset({("p",)}))
    assert apply(State({("p",)}), op) == {("p",)}


atoms = st.sets(st.tuples(st.sampled_from("pqr"), st.integers(0, 3)), max_size=8)


@settings(max_examples=200, deadline=None)
@given(atoms, atoms, atoms)
def test_frame_property(state, add, delete):
    op = Operator("o", (), (), frozenset(add), frozenset(delete))
    after = apply(State(state), op)
    for a in state | add | delete:
        if a not in add and a not in delete:
            assert (a in after) == (a in state)
    assert add <= after


def test_goal_satisfied():
    assert goal_satisfied({"a", "b", "c"}, {"a", "c"})
    assert not goal_satisfied({"a"}, {"a", "b"})


def test_execute_counting(counting):
    states = execute_plan(counting.cases["count_0_8"], counting.concrete)
    assert len(states) == 9 and states[-1] == {("value", 8)}


def test_execute_cube(cube):
    states = execute_plan(cube.cases["x"], cube.concrete)
    assert states == [bits(0, 0, 0), bits(0, 1, 0), bits(1, 1, 0), bits(1, 1, 1), bits(1, 0, 1), bits(0, 0, 1)]


def test_execute_prefix_is_prefix(cube):
    case = cube.cases["x"]
    full = execute_plan(case, cube.concrete)
    for k in range(len(case.plan) + 1):
        part = execute_plan(PlanningCase(case.problem, case.plan[:k]), cube.concrete, check_goal=False)
        assert part == full[:k + 1]


def test_execute_lathe_goal(lathe_domains):
    case = figure9_fixture(lathe_domains[0])
    states = execute_plan(case, lathe_domains[0])
    assert goal_satisfied(states[-1], case.problem.goal)


def test_cut_on_covered_area_fails(lathe_domains):
    concrete = lathe_domains[0]
    case = figure9_fixture(concrete)
    # chucked on the left, cells of columns 1-2 are covered
    bad = resolve_plan(concrete, list(FIGURE9_PLAN[:2]) + [("cut", (1, 5))])
    with pytest.raises(OperatorNotApplicable) as exc:
        execute_plan(PlanningCase(case.problem, bad), concrete)
    assert exc.value.index == 2


def test_goal_not_reached(cube):
    case = cube.cases["x"]
    with pytest.raises(GoalNotReached):
        execute_plan(PlanningCase(case.problem, case.plan[:3]), cube.concrete)


def test_state_validation(cube):
    with pytest.raises(ValueError):
        cube.concrete.make_state({("val", "e1")})
    with pytest.raises(ValueError):
        cube.concrete.make_state({("val", Var("X"), 1)})


def test_scope_violations():
    X, Y = Var("X"), Var("Y")
    s = OperatorSchema("o", (X,), (("p", X),), (("q", Y),), (("r", Y),))
    assert len(s.scope_violations()) == 2
