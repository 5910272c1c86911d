import pytest

from abscase.domain import AbstractCase, PlanningCase, Problem, State, execute_plan, plan_is_valid
from abscase.lathe import figure9_fixture
from abscase.pabs import pabs
from abscase.planner import (
    CaseBase,
    Levels,
    SearchBudget,
    Unsolved,
    abstract_state_of,
    is_applicable,
    load_casebase,
    reconstruct,
    refine_dfid,
    retrieve,
    save_casebase,
    solve_hierarchical,
    solve_pure,
    solve_with_cases,
)
from abscase.toy import counting_fixture, cube_fixture


def bits(b1, b2, b3):
    return State({("val", "e1", b1), ("val", "e2", b2), ("val", "e3", b3)})


def S(*names):
    return State({(n,) for n in names})


def test_abstract_state_of_cube(cube_levels):
    assert abstract_state_of(bits(1, 0, 0), cube_levels) == S("a4")
    assert abstract_state_of(bits(0, 0, 0), cube_levels) == S("a1")


def test_abstract_state_of_finished_lathe(lathe_levels):
    goal = figure9_fixture(lathe_levels.concrete).problem.goal
    image = abstract_state_of(goal, lathe_levels)
    status = {a for a in image if a[0] == "abs_area_state"}
    assert status == {("abs_area_state", side, "ready") for side in ("left", "middle", "right")}


def test_cube_theory_partitions(cube_levels):
    import itertools

    for b in itertools.product((0, 1), repeat=3):
        image = abstract_state_of(bits(*b), cube_levels)
        assert len(image & {("a1",), ("a2",), ("a3",), ("a4",)}) == 1


def test_counting_outside_range(counting_levels):
    assert abstract_state_of(State({("value", 12)}), counting_levels) == State()


def test_reconstruct(cube):
    inner, alpha = reconstruct(cube.abstract_cases["ca1"], cube.abstract)
    assert inner == [S("a2"), S("a3")] and alpha == S("a1", "a2", "a3", "a4")
    _, alpha = reconstruct(cube.abstract_cases["ca2"], cube.abstract)
    assert alpha == S("a5", "a6")
    empty = AbstractCase(Problem(S("a1"), S("a1")), ())
    assert reconstruct(empty, cube.abstract) == ([], S("a1"))


def test_applicability(cube, cube_levels):
    y = cube.problems["y"]
    assert is_applicable(cube.abstract_cases["ca1"], y, cube_levels)
    assert not is_applicable(cube.abstract_cases["ca2"], y, cube_levels)
    for ac in pabs(cube.cases["x"], cube.concrete, cube.abstract, cube.theory):
        assert is_applicable(ac, cube.cases["x"].problem, cube_levels)


def test_retrieve(cube, cube_levels):
    cb = CaseBase([cube.abstract_cases["ca2"], cube.abstract_cases["ca1"]])
    assert list(retrieve(cb, cube.problems["y"], cube_levels)) == [cube.abstract_cases["ca1"]]
    assert list(retrieve(CaseBase(), cube.problems["y"], cube_levels)) == []


def test_casebase_order_and_dedup(cube):
    learned = pabs(cube.cases["x"], cube.concrete, cube.abstract, cube.theory)
    cb = CaseBase(learned + learned)
    assert len(cb) == len(learned)
    lengths = [len(c) for c in cb]
    assert lengths == sorted(lengths, reverse=True)
    short = AbstractCase(Problem(S("a1"), S("a2")), cube.abstract_cases["ca1"].plan[:1])
    cb2 = CaseBase([short, cube.abstract_cases["ca1"]])
    assert [len(c) for c in cb2] == [3, 1]


def test_casebase_save_load(cube, tmp_path):
    cb = CaseBase(pabs(cube.cases["x"], cube.concrete, cube.abstract, cube.theory))
    index = save_casebase(cb, tmp_path, "cube_abs")
    again = load_casebase(index, cube.abstract)
    assert list(again) == list(cb)
    assert list(load_casebase(tmp_path, cube.abstract)) == list(cb)


def test_refine_ca1_for_y(cube, cube_levels):
    y = cube.problems["y"]
    inner, alpha = reconstruct(cube.abstract_cases["ca1"], cube.abstract)
    sol = refine_dfid(y.initial, inner, alpha, y.goal, cube_levels)
    assert [seg[0] for seg in sol.segments] == [2, 1, 2]
    states = execute_plan(PlanningCase(y, sol.plan), cube.concrete)
    assert states[2] == bits(1, 1, 0)
    assert sum(seg[0] for seg in sol.segments) == len(sol.plan)


def test_refine_counting_two_segments(counting, counting_levels):
    problem = counting.cases["count_0_8"].problem
    inner, alpha = reconstruct(counting.abstract_cases["count_levels"], counting.abstract)
    sol = refine_dfid(problem.initial, inner, alpha, problem.goal, counting_levels)
    assert [(seg[0], seg[1]) for seg in sol.segments] == [(4, 4), (4, 4)]


def test_refine_empty_goals(cube_levels):
    sol = refine_dfid(bits(1, 1, 1), [], (), State({("val", "e1", 1)}), cube_levels)
    assert sol.plan == ()


def test_solve_with_cases_uses_ca1(cube, cube_levels):
    cb = CaseBase([cube.abstract_cases["ca1"], cube.abstract_cases["ca2"]])
    sol = solve_with_cases(cube.problems["y"], cb, cube_levels)
    assert sol.case == cube.abstract_cases["ca1"] and not sol.fallback
    assert plan_is_valid(PlanningCase(cube.problems["y"], sol.plan), cube.concrete)


def test_empty_casebase_equals_pure(cube, cube_levels):
    a = solve_with_cases(cube.problems["y"], CaseBase(), cube_levels)
    b = solve_pure(cube.problems["y"], cube_levels)
    assert a.plan == b.plan and a.expansions == b.expansions and a.fallback


def test_solve_pure_examples(counting, cube):
    sol = solve_pure(counting.cases["count_0_8"].problem, counting.concrete)
    assert len(sol.plan) == 8 and sol.expansions == sum(range(1, 9))
    sol = solve_pure(cube.cases["x"].problem, cube.concrete)
    assert len(sol.plan) == 5
    trivial = Problem(bits(1, 1, 1), State({("val", "e1", 1)}))
    sol = solve_pure(trivial, cube.concrete)
    assert sol.plan == () and sol.expansions == 0


def test_budget_reports_unsolved(counting):
    with pytest.raises(Unsolved) as exc:
        solve_pure(counting.cases["count_0_8"].problem, counting.concrete, SearchBudget(10))
    assert exc.value.reason == "budget"


def test_exhausted_reports_unsolved(cube):
    impossible = Problem(bits(0, 0, 0), State({("val", "e1", 2)}))
    with pytest.raises(Unsolved) as exc:
        solve_pure(impossible, cube.concrete)
    assert exc.value.reason == "exhausted"


def test_hierarchical_cube_no_better_than_case():
    bundle = cube_fixture(4)
    levels = Levels(bundle.concrete, bundle.abstract, bundle.theory)
    problem = bundle.cases["x"].problem
    budget = SearchBudget(5000)
    cases = solve_with_cases(problem, CaseBase([bundle.abstract_cases["ca1"]]), levels, budget)
    try:
        spent = solve_hierarchical(problem, levels, budget).expansions
    except Unsolved as exc:
        spent = exc.expansions
    assert spent >= cases.expansions


def test_hierarchical_counting(counting, counting_levels):
    sol = solve_hierarchical(counting.cases["count_0_8"].problem, counting_levels)
    assert [op.name for op in sol.case.plan] == ["raise_low_med", "raise_med_high"]
    assert not sol.fallback and len(sol.plan) == 8


def test_hierarchical_falls_back(counting):
    from abscase.domain import Domain

    frozen = Domain("counting_abs", counting.abstract.essentials)
    levels = Levels(counting.concrete, frozen, counting.theory)
    sol = solve_hierarchical(counting.cases["count_0_8"].problem, levels)
    assert sol.fallback and len(sol.plan) == 8


def test_replay_guarantee_toys(cube, counting):
    for bundle, name in ((cube, "x"), (counting, "count_0_8")):
        levels = Levels(bundle.concrete, bundle.abstract, bundle.theory)
        case = bundle.cases[name]
        for ac in pabs(case, bundle.concrete, bundle.abstract, bundle.theory):
            sol = solve_with_cases(case.problem, CaseBase([ac]), levels)
            assert not sol.fallback and sol.case == ac


def test_all_modes_sound_and_deterministic():
    bundle = counting_fixture(3)
    levels = Levels(bundle.concrete, bundle.abstract, bundle.theory)
    problem = bundle.cases["count_0_8"].problem
    cb = CaseBase(bundle.abstract_cases.values())
    for solve in (lambda: solve_pure(problem, levels), lambda: solve_hierarchical(problem, levels),
                  lambda: solve_with_cases(problem, cb, levels)):
        a, b = solve(), solve()
        assert a == b
        assert plan_is_valid(PlanningCase(problem, a.plan), bundle.concrete)
        if a.segments:
            assert sum(s[0] for s in a.segments) == len(a.plan)
            assert max(s[1] for s in a.segments) <= len(a.plan)


def test_distractors_inflate_pure_search():
    plain = counting_fixture()
    noisy = counting_fixture(4)
    p = plain.cases["count_0_8"].problem
    assert solve_pure(p, noisy.concrete).expansions > 10 * solve_pure(p, plain.concrete).expansions


def test_search_budget_validation():
    with pytest.raises(ValueError):
        SearchBudget(0)
    with pytest.raises(ValueError):
        SearchBudget(10, 0)
