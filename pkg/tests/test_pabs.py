import random

import pytest

from abscase.domain import AbstractionTheory, Domain, PlanningCase, Problem, State, execute_plan
from abscase.dsl import parse_domain, parse_theory
from abscase.logic import LogicError
from abscase.pabs import (
    PabsError,
    PathLimitExceeded,
    SymbolClash,
    abstraction_program,
    brute_force_abstractions,
    compose_maps,
    join_domains,
    join_theories,
    lift_hierarchy,
    pabs,
    phase1_states,
    phase2_supersets,
    phase3_graph,
    phase4_paths,
    verify_abstraction,
)

from .oracles import random_counting_case, random_cube_case


def S(*names):
    return State({(n,) for n in names})


@pytest.fixture(scope="module")
def cube_phases(cube):
    case = cube.cases["x"]
    states = phase1_states(case, cube.concrete)
    sup = phase2_supersets(states, cube.abstract.essentials, abstraction_program(cube.concrete, cube.theory))
    return states, sup, phase3_graph(sup, cube.abstract)


def test_phase1(counting, cube):
    assert len(phase1_states(counting.cases["count_0_8"], counting.concrete)) == 9
    case = cube.cases["x"]
    with pytest.raises(Exception):
        phase1_states(PlanningCase(case.problem, case.plan[1:]), cube.concrete)
    trivial = PlanningCase(Problem(case.problem.initial, State()), ())
    assert phase1_states(trivial, cube.concrete) == [case.problem.initial]


def test_phase2_supersets(cube_phases):
    _, sup, _ = cube_phases
    assert sup[0] == S("a1")
    assert sup[1] == S("a1", "a5")
    assert sup[2] == S("a2", "a5")
    assert sup[3] == S("a3", "a5", "a6")


def test_phase2_rejects_nonground(cube):
    from abscase.logic import HornClause, Var

    theory = AbstractionTheory((HornClause(("qlevel", Var("X"))),))
    abstract = parse_domain("domain lv. essentials qlevel/1.")
    with pytest.raises(LogicError):
        phase2_supersets([State()], abstract.essentials, abstraction_program(cube.concrete, theory))


def test_phase3_edges(cube_phases):
    _, _, graph = cube_phases
    assert graph.has_edge(0, 2, "oa1")
    assert not graph.has_edge(0, 1, "oa1")
    assert graph.has_edge(0, 1, "add_a5")
    assert all(e.i < e.j for e in graph.edges)


def test_phase4_golden_cases(cube, cube_phases):
    _, sup, graph = cube_phases
    found = phase4_paths(sup, graph, cube.abstract, "x")
    ca1, ca2 = cube.abstract_cases["ca1"], cube.abstract_cases["ca2"]
    assert ca1 in found and ca2 in found
    assert found[found.index(ca1)].beta == (0, 2, 3, 5)
    assert len(set(found)) == len(found)


def test_pabs_golden_and_oracle(cube):
    case = cube.cases["x"]
    got = pabs(case, cube.concrete, cube.abstract, cube.theory)
    assert {cube.abstract_cases["ca1"], cube.abstract_cases["ca2"]} <= set(got)
    assert set(got) == set(brute_force_abstractions(case, cube.concrete, cube.abstract, cube.theory))


def test_counting_abstraction(counting):
    case = counting.cases["count_0_8"]
    got = pabs(case, counting.concrete, counting.abstract, counting.theory)
    assert counting.abstract_cases["count_levels"] in got
    assert set(got) == set(brute_force_abstractions(case, counting.concrete, counting.abstract, counting.theory))


def test_degenerate_theory(cube):
    empty = AbstractionTheory()
    case = cube.cases["x"]
    got = pabs(case, cube.concrete, cube.abstract, empty)
    assert set(got) == set(brute_force_abstractions(case, cube.concrete, cube.abstract, empty))
    trivial = PlanningCase(Problem(case.problem.initial, State()), (), "t")
    [only] = pabs(trivial, cube.concrete, cube.abstract, empty)
    assert only.plan == () and only.problem.initial == State()


@pytest.mark.parametrize("seed", range(10))
def test_random_cube_cases_match_oracle(cube, seed):
    case = random_cube_case(random.Random(seed), cube)
    got = pabs(case, cube.concrete, cube.abstract, cube.theory)
    assert set(got) == set(brute_force_abstractions(case, cube.concrete, cube.abstract, cube.theory))


def test_every_output_is_verified(cube, counting):
    for bundle, name in ((cube, "x"), (counting, "count_0_8")):
        case = bundle.cases[name]
        for ac in pabs(case, bundle.concrete, bundle.abstract, bundle.theory):
            assert verify_abstraction(ac, case, ac.alpha, ac.beta, bundle.concrete, bundle.abstract, bundle.theory)
            states = execute_plan(PlanningCase(ac.problem, ac.plan), bundle.abstract)
            assert set().union(*states) <= ac.alpha


def test_verify_examples(cube):
    case, ca1 = cube.cases["x"], cube.abstract_cases["ca1"]
    alpha = {("a1",), ("a2",), ("a3",), ("a4",)}
    args = (cube.concrete, cube.abstract, cube.theory)
    assert verify_abstraction(ca1, case, alpha, (0, 2, 3, 5), *args)
    bad = verify_abstraction(ca1, case, alpha, (0, 1, 3, 5), *args)
    assert not bad and "state 1" in bad.reason
    # an empty abstract plan needs a one-entry map, so only a zero-step concrete case qualifies
    from abscase.domain import AbstractCase

    still = AbstractCase(Problem(S("a1"), S("a1")), ())
    idle = PlanningCase(Problem(case.problem.initial, case.problem.initial), ())
    assert verify_abstraction(still, idle, {("a1",)}, (0,), *args)
    assert not verify_abstraction(still, case, {("a1",)}, (0, 5), *args)


def test_phase2_monotone(cube):
    prog = abstraction_program(cube.concrete, cube.theory)
    rng = random.Random(0)
    atoms = [("val", f"e{k}", b) for k in (1, 2, 3) for b in (0, 1)]
    for _ in range(100):
        small = State(rng.sample(atoms, rng.randint(0, 6)))
        big = State(small | set(rng.sample(atoms, rng.randint(0, 6))))
        a, b = phase2_supersets([small, big], cube.abstract.essentials, prog)
        assert a <= b


def test_path_cap(cube):
    with pytest.raises(PathLimitExceeded):
        pabs(cube.cases["x"], cube.concrete, cube.abstract, cube.theory, path_cap=3)


def test_disjointness_enforced(cube):
    with pytest.raises(ValueError):
        pabs(cube.cases["x"], cube.concrete, cube.concrete, cube.theory)


def test_pabs_annotates_phase(cube):
    case = cube.cases["x"]
    with pytest.raises(PabsError) as exc:
        pabs(PlanningCase(case.problem, case.plan[::-1]), cube.concrete, cube.abstract, cube.theory)
    assert exc.value.phase == 1


# -- joining and lifting -----------------------------------------------------


def split_cube(cube):
    path_preds = {"a1", "a2", "a3", "a4"}
    ess = cube.abstract.essentials
    ops = cube.abstract.operators
    d1 = Domain("cube_path", {p: ess[p] for p in path_preds}, (), [o for o in ops if o.name.startswith("oa")])
    d2 = Domain("cube_bits", {p: ess[p] for p in ess if p not in path_preds}, (),
                [o for o in ops if not o.name.startswith("oa")])
    t1 = AbstractionTheory(tuple(r for r in cube.theory.rules if r.head[0] in path_preds), "t1")
    t2 = AbstractionTheory(tuple(r for r in cube.theory.rules if r.head[0] not in path_preds), "t2")
    return d1, d2, t1, t2


def test_join_reproduces_cube_abstract(cube):
    d1, d2, _, _ = split_cube(cube)
    joined = join_domains(d1, d2)
    assert joined.essentials == cube.abstract.essentials
    assert {o.name for o in joined.operators} == {o.name for o in cube.abstract.operators}


def test_join_clash_and_rename(cube):
    d1, _, _, _ = split_cube(cube)
    with pytest.raises(SymbolClash):
        join_domains(d1, d1)
    renamed = join_domains(d1, d1, rename=True)
    assert "a1_2" in renamed.essentials and len(renamed.operators) == 6


def test_lemma6_join_preserves_abstraction(cube):
    d1, d2, t1, t2 = split_cube(cube)
    joined, theory = join_domains(d1, d2), join_theories(t1, t2)
    rng = random.Random(11)
    for k in range(10):
        case = random_cube_case(rng, cube, name=f"r{k}")
        for ac in pabs(case, cube.concrete, d1, t1):
            assert verify_abstraction(ac, case, ac.alpha, ac.beta, cube.concrete, joined, theory)


STAGE = """domain counting_stage.
essentials
  phase/1.
operator go_late
  pre: phase(early).
  add: phase(late).
  del: phase(early).
operator go_top
  pre: phase(late).
  add: phase(top).
"""

STAGE_THEORY = """theory counting_phases from counting_abs to counting_stage.
rules
  phase(early) :- qlevel(low).
  phase(late) :- qlevel(medium).
  phase(late) :- qlevel(high).
  phase(top) :- qlevel(high).
"""


def counting_chain(counting):
    stage = parse_domain(STAGE)
    return stage, parse_theory(STAGE_THEORY, counting.abstract, stage)


def test_lemma7_lift_preserves_abstraction(counting):
    stage, t12 = counting_chain(counting)
    c0, upper, theory = lift_hierarchy([counting.concrete, counting.abstract, stage], [counting.theory, t12])
    assert c0 is counting.concrete and set(upper.essentials) == {"qlevel", "phase"}
    rng = random.Random(4)
    checked = 0
    for k in range(10):
        case = random_counting_case(rng, counting, name=f"r{k}")
        for c1 in pabs(case, counting.concrete, counting.abstract, counting.theory):
            mid = PlanningCase(c1.problem, c1.plan, "mid")
            for c2 in pabs(mid, counting.abstract, stage, t12):
                beta = compose_maps(c1.beta, c2.beta)
                assert verify_abstraction(c2, case, c2.alpha, beta, c0, upper, theory)
                checked += 1
    assert checked


def test_lift_hierarchy_arguments(counting):
    with pytest.raises(ValueError):
        lift_hierarchy([counting.concrete], [])


def test_compose_maps():
    assert compose_maps((0, 4, 8), (0, 2)) == (0, 8)
