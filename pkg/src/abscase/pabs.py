"""Learning abstract cases from one concrete case.

The learner runs in four phases:

1. execute the concrete plan, giving states s_0 .. s_n;
2. derive, for every s_i, the superset s_i^a of all abstract atoms the
   theory proves from it;
3. build a graph whose edges ``(i, j, op, proof)`` say that abstract
   operator ``op`` is applicable in s_i^a and adds only atoms of s_j^a;
4. walk the graph from 0 to n, growing the set alpha of atoms the abstract
   case talks about, and keep a path only while every transition on it is
   exact once both endpoints are cut down to alpha.

:func:`brute_force_abstractions` enumerates the same objects by
generate-and-test and serves as an oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

from .domain import (
    AbstractCase,
    AbstractionTheory,
    Domain,
    Operator,
    OperatorSchema,
    PlanError,
    PlanningCase,
    Problem,
    State,
    _ground_instance,
    apply,
    execute_plan,
    state_constants,
)
from .logic import (
    DEFAULT_BUDGET,
    Derivation,
    HornClause,
    LogicError,
    Program,
    ProofBudget,
    Var,
    essential_leaves,
    is_ground,
    iter_answers,
    provable,
    substitute,
    term_str,
    unify,
)

DEFAULT_PATH_CAP = 10_000


class PabsError(Exception):
    """Failure inside one learning phase; ``phase`` is 1..4."""

    def __init__(self, phase: int, message: str, cause: Optional[BaseException] = None):
        super().__init__(f"phase {phase}: {message}")
        self.phase = phase
        self.cause = cause


class PathLimitExceeded(PabsError):
    def __init__(self, cap: int):
        super().__init__(4, f"more than {cap} partial paths")
        self.cap = cap


class OracleCapExceeded(Exception):
    pass


class SymbolClash(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    op: Operator
    proof: Optional[Derivation]
    leaves: frozenset


@dataclass
class TransitionGraph:
    size: int
    edges: List[Edge] = field(default_factory=list)

    def outgoing(self, i: int) -> List[Edge]:
        return [e for e in self.edges if e.i == i]

    def has_edge(self, i: int, j: int, name: str, args: Tuple = ()) -> bool:
        return any(e.i == i and e.j == j and e.op.key == (name, tuple(args)) for e in self.edges)


# -- shared helpers ---------------------------------------------------------


def abstraction_program(concrete: Domain, theory: AbstractionTheory) -> Program:
    """R_c together with the theory's rules: what abstract atoms are proved from."""
    return Program(tuple(concrete.rules) + tuple(theory.rules))


def derive_abstract(state, essentials: Mapping[str, int], program: Program,
                    budget: ProofBudget = DEFAULT_BUDGET) -> State:
    """All ground abstract essential atoms provable from ``state``."""
    facts = state.index if isinstance(state, State) else State(state).index
    out = set()
    for pred, arity in sorted(essentials.items()):
        goal = (pred, *(Var(f"_A{k}") for k in range(arity)))
        for answer, _ in iter_answers(program, [goal], facts, budget, proofs=False):
            g = tuple([pred] + [answer.get(f"_A{k}", Var(f"_A{k}")) for k in range(arity)])
            if not is_ground(g):
                raise LogicError(f"theory derives non-ground atom {term_str(g)}")
            out.add(g)
    return State(out)


def check_disjoint(concrete: Domain, abstract: Domain) -> None:
    c_syms = set(concrete.defined_predicates()) | {o.name for o in concrete.operators}
    a_syms = set(abstract.defined_predicates()) | {o.name for o in abstract.operators}
    clash = sorted(c_syms & a_syms)
    if clash:
        raise SymbolClash("concrete and abstract domains share symbols: " + ", ".join(clash))


def _transition_ok(prev: frozenset, nxt: frozenset, op: Operator, program: Program,
                   budget: ProofBudget) -> bool:
    if not provable(program, list(op.pre), State(prev), budget):
        return False
    return (prev - op.delete) | op.add == nxt


# -- phases -----------------------------------------------------------------


def phase1_states(case: PlanningCase, concrete: Domain, budget: ProofBudget = DEFAULT_BUDGET) -> List[State]:
    return execute_plan(case, concrete, budget)


def phase2_supersets(states: Sequence[State], abstract_essentials: Mapping[str, int], rules,
                     budget: ProofBudget = DEFAULT_BUDGET) -> List[State]:
    """``rules`` is R_c plus the theory, as a :class:`Program` or clause list."""
    program = rules if isinstance(rules, Program) else Program(rules)
    return [derive_abstract(s, abstract_essentials, program, budget) for s in states]


def _bind_adds(adds: Sequence, target: State, binding: dict) -> Iterator[dict]:
    if not adds:
        yield binding
        return
    first = adds[0]
    for atom_ in target.index.by_pred.get(first[0], ()):
        b = unify(first, atom_, binding)
        if b is not None:
            yield from _bind_adds(adds[1:], target, b)


def phase3_graph(supersets: Sequence[State], abstract: Domain,
                 budget: ProofBudget = DEFAULT_BUDGET) -> TransitionGraph:
    n = len(supersets) - 1
    graph = TransitionGraph(n + 1)
    program = abstract.program
    essentials = abstract.essentials
    for i, s_i in enumerate(supersets):
        for schema in abstract.operators:
            for sigma, proof in iter_answers(program, list(schema.pre), s_i, budget):
                leaves = essential_leaves(proof, essentials)
                for j in range(i + 1, n + 1):
                    _add_edges(graph, schema, sigma, proof, leaves, i, j, supersets[j])
    return graph


def _add_edges(graph, schema: OperatorSchema, sigma, proof, leaves, i, j, target: State):
    adds = [substitute(a, sigma) for a in schema.add]
    seen = set()
    for theta in _bind_adds(adds, target, dict(sigma)):
        if any(not is_ground(theta.get(p.name, p)) for p in schema.params):
            continue
        op = _ground_instance(schema, theta)
        if op.key in seen:
            continue
        seen.add(op.key)
        graph.edges.append(Edge(i, j, op, proof, leaves))


def phase4_paths(supersets: Sequence[State], graph: TransitionGraph, abstract: Domain, source: str = "",
                 budget: ProofBudget = DEFAULT_BUDGET, path_cap: int = DEFAULT_PATH_CAP) -> List[AbstractCase]:
    """Sound paths from state 0 to state n, as deduplicated abstract cases in discovery order."""
    n = len(supersets) - 1
    program = abstract.program
    by_source: Dict[int, List[Edge]] = {}
    for e in graph.edges:
        by_source.setdefault(e.i, []).append(e)
    for edges in by_source.values():
        edges.sort(key=lambda e: e.j)
    cache: Dict[tuple, bool] = {}

    def holds(i, j, op, alpha):
        key = (i, j, op.key, alpha)
        hit = cache.get(key)
        if hit is None:
            hit = _transition_ok(supersets[i] & alpha, supersets[j] & alpha, op, program, budget)
            cache[key] = hit
        return hit

    results: Dict[tuple, AbstractCase] = {}
    paths = 0
    # depth-first; stack entries are (beta, plan, alpha)
    stack = [((0,), (), frozenset())]
    while stack:
        beta, plan, alpha = stack.pop()
        i = beta[-1]
        if i == n:
            case = AbstractCase(
                Problem(State(supersets[0] & alpha), State(supersets[n] & alpha)),
                plan, source, beta, alpha)
            results.setdefault(case.key, case)
            continue
        children = []
        for e in by_source.get(i, ()):
            new_alpha = alpha | e.leaves | e.op.add
            if not holds(i, e.j, e.op, new_alpha):
                continue
            if new_alpha != alpha and not all(
                    holds(beta[k], beta[k + 1], plan[k], new_alpha) for k in range(len(plan))):
                continue
            paths += 1
            if paths > path_cap:
                raise PathLimitExceeded(path_cap)
            children.append((beta + (e.j,), plan + (e.op,), new_alpha))
        stack.extend(reversed(children))
    return list(results.values())


def pabs(case: PlanningCase, concrete: Domain, abstract: Domain, theory: AbstractionTheory,
         budget: ProofBudget = DEFAULT_BUDGET, path_cap: int = DEFAULT_PATH_CAP) -> List[AbstractCase]:
    """All abstract cases of ``case``; see the module docstring."""
    check_disjoint(concrete, abstract)
    try:
        states = phase1_states(case, concrete, budget)
    except (PlanError, LogicError) as exc:
        raise PabsError(1, str(exc), exc) from exc
    try:
        supersets = phase2_supersets(states, abstract.essentials, abstraction_program(concrete, theory), budget)
    except LogicError as exc:
        raise PabsError(2, str(exc), exc) from exc
    try:
        graph = phase3_graph(supersets, abstract, budget)
    except LogicError as exc:
        raise PabsError(3, str(exc), exc) from exc
    try:
        return phase4_paths(supersets, graph, abstract, case.name or case.problem.name, budget, path_cap)
    except LogicError as exc:
        raise PabsError(4, str(exc), exc) from exc


# -- checking ---------------------------------------------------------------


class Verdict:
    """Boolean result with the reason it is false."""

    __slots__ = ("ok", "reason")

    def __init__(self, ok: bool, reason: str = ""):
        self.ok = ok
        self.reason = reason

    def __bool__(self):
        return self.ok

    def __repr__(self):
        return "Verdict(True)" if self.ok else f"Verdict(False, {self.reason!r})"


def verify_abstraction(abstract_case, concrete_case: PlanningCase, alpha: Iterable, beta: Sequence[int],
                       concrete: Domain, abstract: Domain, theory: AbstractionTheory,
                       budget: ProofBudget = DEFAULT_BUDGET) -> Verdict:
    """Check that ``abstract_case`` abstracts ``concrete_case`` under the image ``alpha`` and map ``beta``."""
    alpha = frozenset(alpha)
    beta = tuple(beta)
    try:
        c_states = execute_plan(concrete_case, concrete, budget)
    except PlanError as exc:
        return Verdict(False, f"concrete plan fails: {exc}")
    try:
        a_states = execute_plan(PlanningCase(abstract_case.problem, abstract_case.plan), abstract, budget)
    except PlanError as exc:
        return Verdict(False, f"abstract plan fails: {exc}")
    n, m = len(c_states) - 1, len(a_states) - 1
    if len(beta) != m + 1:
        return Verdict(False, f"sequence map has {len(beta)} entries, abstract case has {m + 1} states")
    if beta[0] != 0 or beta[-1] != n or any(a >= b for a, b in zip(beta, beta[1:])):
        return Verdict(False, f"sequence map {beta} is not strictly increasing from 0 to {n}")
    bad = [a for a in alpha if abstract.essentials.get(a[0]) != len(a) - 1]
    if bad:
        return Verdict(False, "image contains non-essential atoms: " + ", ".join(map(term_str, bad)))
    program = abstraction_program(concrete, theory)
    for j, b in enumerate(beta):
        image = derive_abstract(c_states[b], abstract.essentials, program, budget) & alpha
        if image != a_states[j]:
            return Verdict(False, f"abstract state {j} is {a_states[j]!r} but concrete state {b} maps to {State(image)!r}")
    return Verdict(True)


def _ground_instances(schema: OperatorSchema, state: State, program: Program, constants: Sequence,
                      budget: ProofBudget) -> Iterator[Tuple[Operator, Derivation]]:
    """Applicable ground instances with one proof each answer; free parameters range over ``constants``."""
    for sigma, proof in iter_answers(program, list(schema.pre), state, budget):
        free = [p for p in schema.params if not is_ground(sigma.get(p.name, p))]
        for values in itertools.product(constants, repeat=len(free)):
            b = dict(sigma)
            b.update({p.name: v for p, v in zip(free, values)})
            yield _ground_instance(schema, b), proof


def brute_force_abstractions(case: PlanningCase, concrete: Domain, abstract: Domain, theory: AbstractionTheory,
                             relevant_only: bool = True, budget: ProofBudget = DEFAULT_BUDGET,
                             max_states: int = 9, max_atoms: int = 10) -> List[AbstractCase]:
    """Enumerate abstract cases by generate-and-test.

    Every image alpha drawn from the derivable abstract atoms, every
    sequence map and every chain of ground abstract operators is tried; the
    survivors are exactly the cases that pass :func:`verify_abstraction`.
    With ``relevant_only`` an image must also consist of atoms the plan
    touches: the union over steps of the added atoms and the leaves of some
    proof of the step's precondition.  Without it, frame atoms that never
    change may pad the image.
    """
    check_disjoint(concrete, abstract)
    states = execute_plan(case, concrete, budget)
    if len(states) > max_states:
        raise OracleCapExceeded(f"{len(states)} states exceeds {max_states}")
    supersets = phase2_supersets(states, abstract.essentials, abstraction_program(concrete, theory), budget)
    universe = sorted(set().union(*supersets), key=lambda a: term_str(a))
    if len(universe) > max_atoms:
        raise OracleCapExceeded(f"{len(universe)} derivable abstract atoms exceeds {max_atoms}")
    constants = state_constants(universe)
    program = abstract.program
    n = len(states) - 1
    transitions: Dict[tuple, list] = {}

    def steps(t_prev: frozenset, t_next: frozenset):
        key = (t_prev, t_next)
        if key not in transitions:
            found: Dict[tuple, list] = {}
            order = []
            s = State(t_prev)
            for schema in abstract.operators:
                for op, proof in _ground_instances(schema, s, program, constants, budget):
                    if apply(s, op) != t_next:
                        continue
                    if op.key not in found:
                        found[op.key] = []
                        order.append(op)
                    found[op.key].append(essential_leaves(proof, abstract.essentials) | op.add)
            transitions[key] = [(op, found[op.key]) for op in order]
        return transitions[key]

    results: Dict[tuple, AbstractCase] = {}
    for size in range(len(universe) + 1):
        for chosen in itertools.combinations(universe, size):
            alpha = frozenset(chosen)
            t = [s & alpha for s in supersets]

            def walk(i, beta, plan, touched):
                if i == n:
                    if relevant_only and alpha not in touched:
                        return
                    c = AbstractCase(Problem(State(t[0]), State(t[n])), plan, case.name, beta, alpha)
                    results.setdefault(c.key, c)
                    return
                for j in range(i + 1, n + 1):
                    for op, leafsets in steps(t[i], t[j]):
                        if relevant_only:
                            nxt = {u | ls for u in touched for ls in leafsets if (u | ls) <= alpha}
                            if not nxt:
                                continue
                        else:
                            nxt = touched
                        walk(j, beta + (j,), plan + (op,), nxt)

            walk(0, (0,), (), {frozenset()})
    return list(results.values())


# -- combining domains ------------------------------------------------------


def _symbols(domain: Domain) -> Set[str]:
    return set(domain.defined_predicates()) | {o.name for o in domain.operators}


def _rename_term(t, mapping):
    if type(t) is tuple:
        return (mapping.get(t[0], t[0]), *(_rename_term(x, mapping) for x in t[1:]))
    return t


def rename_domain(domain: Domain, mapping: Mapping[str, str]) -> Domain:
    """Rename predicates and operators; ``mapping`` sends old names to new ones."""
    def atoms(seq):
        return tuple(_rename_term(a, mapping) for a in seq)

    rules = tuple(HornClause(_rename_term(r.head, mapping), atoms(r.body)) for r in domain.rules)
    ops = tuple(OperatorSchema(mapping.get(o.name, o.name), o.params, atoms(o.pre), atoms(o.add), atoms(o.delete))
                for o in domain.operators)
    essentials = {mapping.get(p, p): k for p, k in domain.essentials.items()}
    return Domain(domain.name, essentials, rules, ops)


def join_domains(first: Domain, second: Domain, rename: bool = False, name: str = "") -> Domain:
    """Componentwise union of two symbol-disjoint domains.

    With ``rename`` colliding symbols of ``second`` get a ``_2`` suffix
    instead of raising :class:`SymbolClash`.
    """
    clash = _symbols(first) & _symbols(second)
    clash -= {"naf", "sum", "diff", "lt", "le", "eq", "neq"}
    if clash:
        if not rename:
            raise SymbolClash("domains share symbols: " + ", ".join(sorted(clash)))
        taken = _symbols(first) | _symbols(second)
        mapping = {}
        for s in sorted(clash):
            new = f"{s}_2"
            while new in taken:
                new += "_2"
            taken.add(new)
            mapping[s] = new
        second = rename_domain(second, mapping)
    essentials = dict(first.essentials)
    essentials.update(second.essentials)
    return Domain(name or f"{first.name}_{second.name}", essentials,
                  tuple(first.rules) + tuple(second.rules),
                  tuple(first.operators) + tuple(second.operators))


def join_theories(*theories: AbstractionTheory, name: str = "") -> AbstractionTheory:
    rules = tuple(r for t in theories for r in t.rules)
    return AbstractionTheory(rules, name or "_".join(t.name for t in theories),
                             theories[0].concrete if theories else "", theories[-1].abstract if theories else "")


def lift_hierarchy(levels: Sequence[Domain], theories: Sequence[AbstractionTheory]
                   ) -> Tuple[Domain, Domain, AbstractionTheory]:
    """Collapse a chain of domains into a two-level description.

    ``theories[k]`` maps level k to level k+1.  The result is the lowest
    level, the union of all higher levels, and the union of all theories.
    """
    if len(levels) < 2 or len(theories) != len(levels) - 1:
        raise ValueError("need l+1 levels and l theories")
    upper = levels[1]
    for d in levels[2:]:
        upper = join_domains(upper, d, name=f"{upper.name}_{d.name}")
    check_disjoint(levels[0], upper)
    return levels[0], upper, join_theories(*theories)


def compose_maps(lower: Sequence[int], upper: Sequence[int]) -> Tuple[int, ...]:
    """Sequence map of a two-step abstraction: ``upper`` indexes into ``lower``."""
    return tuple(lower[k] for k in upper)
