"""Solving concrete problems: pure DFID, refinement of abstract cases, and hierarchical search.

Refinement follows the abstract states of a case one segment at a time.
A segment ends in a concrete state whose abstraction, restricted to the
case's image alpha, equals the next abstract state exactly.  Each segment is
searched by depth-first iterative deepening; when a later segment fails
the search backtracks into the earlier one.
"""

from __future__ import annotations

import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from .domain import (
    AbstractCase,
    AbstractionTheory,
    Domain,
    Operator,
    PlanError,
    PlanningCase,
    Problem,
    State,
    apply,
    execute_plan,
    successors,
)
from .dsl import format_case, format_index, parse_case, parse_index, read_text
from .logic import DEFAULT_BUDGET, ProofBudget, Program, provable
from .pabs import abstraction_program, derive_abstract

DEEP_MAX = 30


@dataclass(frozen=True)
class SearchBudget:
    max_expansions: int = 100_000
    deep_max: int = DEEP_MAX
    wall_clock: Optional[float] = None
    proof: ProofBudget = DEFAULT_BUDGET

    def __post_init__(self):
        if self.max_expansions <= 0 or self.deep_max <= 0:
            raise ValueError("search limits must be positive")
        if self.wall_clock is not None and self.wall_clock <= 0:
            raise ValueError("wall-clock limit must be positive")


@dataclass
class Solution:
    plan: Tuple[Operator, ...]
    expansions: int
    mode: str
    case: Optional[AbstractCase] = None
    failed_refinements: int = 0
    fallback: bool = False
    # (plan length, depth found, expansions) per refined segment
    segments: Tuple[Tuple[int, int, int], ...] = ()

    @property
    def length(self) -> int:
        return len(self.plan)


class Unsolved(Exception):
    """No plan within the search budget, or the search space was exhausted."""

    def __init__(self, reason: str, expansions: int, failed_refinements: int = 0):
        super().__init__(f"unsolved ({reason}) after {expansions} expansions")
        self.reason = reason
        self.expansions = expansions
        self.failed_refinements = failed_refinements


class _OutOfBudget(Exception):
    pass


@dataclass(frozen=True)
class Levels:
    """Concrete domain, abstract domain and the theory linking them."""

    concrete: Domain
    abstract: Domain
    theory: AbstractionTheory
    _program: Program = field(default=None, init=False, repr=False, compare=False)

    @property
    def program(self) -> Program:
        if self._program is None:
            object.__setattr__(self, "_program", abstraction_program(self.concrete, self.theory))
        return self._program


class _Counter:
    """Expansion counter shared by every search started for one problem."""

    def __init__(self, budget: SearchBudget):
        self.budget = budget
        self.expansions = 0
        self.deadline = time.monotonic() + budget.wall_clock if budget.wall_clock else None

    def tick(self):
        self.expansions += 1
        if self.expansions > self.budget.max_expansions:
            raise _OutOfBudget
        if self.deadline is not None and self.expansions % 256 == 0 and time.monotonic() > self.deadline:
            raise _OutOfBudget


@contextmanager
def _deep_recursion(limit: int):
    old = sys.getrecursionlimit()
    if limit > old:
        sys.setrecursionlimit(limit)
    try:
        yield
    finally:
        sys.setrecursionlimit(old)


# -- case base --------------------------------------------------------------


class CaseBase:
    """Abstract cases ordered by descending plan length; insertion order breaks ties."""

    def __init__(self, cases: Iterable[AbstractCase] = (), domain_name: str = ""):
        self.domain_name = domain_name
        self._cases: List[AbstractCase] = []
        self._keys = set()
        for c in cases:
            self.add(c)

    def add(self, case: AbstractCase) -> bool:
        if case.key in self._keys:
            return False
        self._keys.add(case.key)
        pos = len(self._cases)
        while pos > 0 and len(self._cases[pos - 1].plan) < len(case.plan):
            pos -= 1
        self._cases.insert(pos, case)
        return True

    def extend(self, cases: Iterable[AbstractCase]) -> int:
        return sum(self.add(c) for c in cases)

    def __iter__(self):
        return iter(self._cases)

    def __len__(self):
        return len(self._cases)

    def __contains__(self, case):
        return case.key in self._keys


def save_casebase(casebase: CaseBase, directory: Union[str, Path], domain_name: str = "") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    name = domain_name or casebase.domain_name
    entries = []
    for k, case in enumerate(casebase):
        fname = f"case_{k:04d}.pcase"
        if not case.name:
            case = AbstractCase(case.problem, case.plan, case.source, case.beta, case.alpha, f"case_{k:04d}")
        (directory / fname).write_text(format_case(case, name), encoding="utf-8")
        entries.append((fname, len(case.plan)))
    index = directory / "casebase.idx"
    index.write_text(format_index(entries), encoding="utf-8")
    return index


def load_casebase(index: Union[str, Path], abstract: Domain) -> CaseBase:
    """Read ``casebase.idx`` (or the directory holding it) and its case files."""
    index = Path(index)
    if index.is_dir():
        index = index / "casebase.idx"
    cb = CaseBase(domain_name=abstract.name)
    for fname, _ in parse_index(read_text(index)):
        case = parse_case(read_text(index.parent / fname), abstract)
        if not isinstance(case, AbstractCase):
            case = AbstractCase(case.problem, case.plan, name=case.name)
        cb.add(case)
    return cb


# -- applicability ----------------------------------------------------------


def abstract_state_of(state: State, levels: Levels, budget: ProofBudget = DEFAULT_BUDGET) -> State:
    return derive_abstract(state, levels.abstract.essentials, levels.program, budget)


def reconstruct(case: AbstractCase, abstract: Domain,
                budget: ProofBudget = DEFAULT_BUDGET) -> Tuple[List[State], frozenset]:
    """Intermediate abstract states s_1 .. s_{m-1} of ``case`` and the image alpha they induce."""
    states = execute_plan(PlanningCase(case.problem, case.plan), abstract, budget)
    if states[-1] != case.problem.goal:
        raise PlanError("abstract plan does not end in the stored final state", len(case.plan), states[-1])
    alpha = frozenset().union(*states)
    return states[1:-1], alpha


def _applicable(case: AbstractCase, s_i: State, s_g: State, abstract: Domain, budget: ProofBudget):
    """Return (intermediates, alpha) when ``case`` applies to the abstracted problem, else None."""
    if not (case.problem.initial <= s_i and case.problem.goal <= s_g):
        return None
    inner, alpha = reconstruct(case, abstract, budget)
    if s_i & alpha != case.problem.initial or s_g & alpha != case.problem.goal:
        return None
    return inner, alpha


def is_applicable(case: AbstractCase, problem: Problem, levels: Levels,
                  budget: ProofBudget = DEFAULT_BUDGET) -> bool:
    s_i = abstract_state_of(problem.initial, levels, budget)
    s_g = abstract_state_of(problem.goal, levels, budget)
    return _applicable(case, s_i, s_g, levels.abstract, budget) is not None


def retrieve(casebase: Iterable[AbstractCase], problem: Problem, levels: Levels,
             budget: ProofBudget = DEFAULT_BUDGET) -> Iterator[AbstractCase]:
    """Applicable cases, longest abstract plan first."""
    s_i = abstract_state_of(problem.initial, levels, budget)
    s_g = abstract_state_of(problem.goal, levels, budget)
    ordered = casebase if isinstance(casebase, CaseBase) else CaseBase(casebase)
    for case in ordered:
        if _applicable(case, s_i, s_g, levels.abstract, budget) is not None:
            yield case


# -- refinement -------------------------------------------------------------


class _Refiner:
    def __init__(self, levels: Levels, goal: State, alpha: frozenset, counter: _Counter):
        self.levels = levels
        self.domain = levels.concrete
        self.goal = goal
        self.alpha = tuple(sorted(alpha))
        self.counter = counter
        self.proof = counter.budget.proof
        self.deep_max = counter.budget.deep_max
        self.failed: set = set()
        self.images: Dict[State, frozenset] = {}
        self.segment_expansions: Dict[int, int] = {}
        self.lengths: Dict[int, int] = {}
        self.depths: Dict[int, int] = {}
        self.cutoff = False

    def image(self, state: State) -> frozenset:
        hit = self.images.get(state)
        if hit is None:
            program = self.levels.program
            hit = frozenset(e for e in self.alpha if provable(program, [e], state, self.proof))
            if len(self.images) > 200_000:
                self.images.clear()
            self.images[state] = hit
        return hit

    def refine(self, state: State, goals: Sequence[State], k: int) -> Optional[List[Operator]]:
        """Iterative deepening for segment ``k``; returns the plan for the rest of the problem."""
        key = (state, k)
        if key in self.failed:
            return None
        for depth in range(self.deep_max + 1):
            self.cutoff = False
            plan = self.bounded(state, goals, k, depth, [state])
            if plan is not None:
                self.depths[k] = depth
                return plan
            if not self.cutoff:
                break  # the whole tree was seen; deeper iterations add nothing
        self.failed.add(key)
        return None

    def bounded(self, state: State, goals, k: int, depth: int, path: List[State]):
        if k == len(goals):
            if self.goal <= state:
                self.lengths[k] = len(path) - 1
                return []
        elif self.image(state) == goals[k]:
            saved = self.cutoff
            rest = self.refine(state, goals, k + 1)
            self.cutoff = saved
            if rest is not None:
                self.lengths[k] = len(path) - 1
                return rest
        if depth == 0:
            self.cutoff = True
            return None
        self.counter.tick()
        self.segment_expansions[k] = self.segment_expansions.get(k, 0) + 1
        for op, nxt in successors(state, self.domain, self.proof):
            if nxt in path:
                continue
            path.append(nxt)
            sub = self.bounded(nxt, goals, k, depth - 1, path)
            path.pop()
            if sub is not None:
                return [op] + sub
        return None


def _segments(refiner: _Refiner) -> Tuple[Tuple[int, int, int], ...]:
    return tuple((refiner.lengths[k], refiner.depths.get(k, 0), refiner.segment_expansions.get(k, 0))
                 for k in sorted(refiner.lengths))


def refine_dfid(initial: State, goals: Sequence[State], alpha: Iterable, goal: State, levels: Levels,
                budget: SearchBudget = SearchBudget(), counter: Optional[_Counter] = None) -> Optional[Solution]:
    """Refine the abstract states ``goals`` into a concrete plan from ``initial`` to ``goal``.

    Returns ``None`` when every depth up to the limit fails; raises
    :class:`Unsolved` when the expansion budget runs out.
    """
    own = counter is None
    counter = counter or _Counter(budget)
    refiner = _Refiner(levels, goal, frozenset(alpha), counter)
    goals = [State(g) for g in goals]
    try:
        with _deep_recursion(10_000 + 100 * (len(goals) + 1) * counter.budget.deep_max):
            plan = refiner.refine(initial, goals, 0)
    except _OutOfBudget:
        if own:
            raise Unsolved("budget", counter.expansions) from None
        raise
    if plan is None:
        return None
    return Solution(tuple(plan), counter.expansions, "refine", segments=_segments(refiner))


def solve_pure(problem: Problem, levels_or_domain: Union[Levels, Domain],
               budget: SearchBudget = SearchBudget()) -> Solution:
    levels = _as_levels(levels_or_domain)
    counter = _Counter(budget)
    try:
        sol = refine_dfid(problem.initial, (), (), problem.goal, levels, budget, counter)
    except _OutOfBudget:
        raise Unsolved("budget", counter.expansions) from None
    if sol is None:
        raise Unsolved("exhausted", counter.expansions)
    sol.mode = "pure"
    return sol


def _as_levels(x) -> Levels:
    if isinstance(x, Levels):
        return x
    return Levels(x, Domain("none", {}), AbstractionTheory())


def _refine_case(case: AbstractCase, problem: Problem, inner, alpha, levels, counter):
    sol = refine_dfid(problem.initial, inner, alpha, problem.goal, levels, counter.budget, counter)
    if sol is not None:
        sol.case = case
    return sol


def solve_with_cases(problem: Problem, casebase: Iterable[AbstractCase], levels: Levels,
                     budget: SearchBudget = SearchBudget()) -> Solution:
    """Refine retrieved cases in order; fall back to pure search when none refines."""
    counter = _Counter(budget)
    proof = budget.proof
    failures = 0
    try:
        s_i = abstract_state_of(problem.initial, levels, proof)
        s_g = abstract_state_of(problem.goal, levels, proof)
        ordered = casebase if isinstance(casebase, CaseBase) else CaseBase(casebase)
        for case in ordered:
            hit = _applicable(case, s_i, s_g, levels.abstract, proof)
            if hit is None:
                continue
            sol = _refine_case(case, problem, hit[0], hit[1], levels, counter)
            if sol is not None:
                sol.mode = "cases"
                sol.failed_refinements = failures
                return sol
            failures += 1
        sol = refine_dfid(problem.initial, (), (), problem.goal, levels, budget, counter)
    except _OutOfBudget:
        raise Unsolved("budget", counter.expansions, failures) from None
    if sol is None:
        raise Unsolved("exhausted", counter.expansions, failures)
    sol.mode = "cases"
    sol.fallback = True
    sol.failed_refinements = failures
    return sol


def _abstract_plans(start: State, goal: State, abstract: Domain, counter: _Counter) -> Iterator[List[Tuple[Operator, State]]]:
    """Abstract plans reaching ``goal`` (as a subset), shortest first, each reported once."""
    proof = counter.budget.proof
    cache: Dict[State, list] = {}

    def succ(s):
        hit = cache.get(s)
        if hit is None:
            hit = successors(s, abstract, proof)
            cache[s] = hit
        return hit

    for depth in range(counter.budget.deep_max + 1):
        cut = [False]

        def walk(s, d, path, states):
            if d == 0:
                if goal <= s:
                    yield list(path)
                else:
                    cut[0] = True
                return
            if goal <= s:
                return  # already reported at a shallower depth
            counter.tick()
            for op, nxt in succ(s):
                if nxt in states:
                    continue
                path.append((op, nxt))
                states.append(nxt)
                yield from walk(nxt, d - 1, path, states)
                states.pop()
                path.pop()

        yield from walk(start, depth, [], [start])
        if not cut[0]:
            return


def solve_hierarchical(problem: Problem, levels: Levels, budget: SearchBudget = SearchBudget()) -> Solution:
    """Search the abstract domain for plans and refine each as a transient case."""
    counter = _Counter(budget)
    proof = budget.proof
    failures = 0
    try:
        s_i = abstract_state_of(problem.initial, levels, proof)
        s_g = abstract_state_of(problem.goal, levels, proof)
        with _deep_recursion(10_000 + 10 * budget.deep_max):
            for steps in _abstract_plans(s_i, s_g, levels.abstract, counter):
                states = [s_i] + [s for _, s in steps]
                case = AbstractCase(Problem(s_i, states[-1]), tuple(op for op, _ in steps))
                alpha = frozenset().union(*states)
                sol = _refine_case(case, problem, states[1:-1], alpha, levels, counter)
                if sol is not None:
                    sol.mode = "hierarchical"
                    sol.failed_refinements = failures
                    return sol
                failures += 1
        sol = refine_dfid(problem.initial, (), (), problem.goal, levels, budget, counter)
    except _OutOfBudget:
        raise Unsolved("budget", counter.expansions, failures) from None
    if sol is None:
        raise Unsolved("exhausted", counter.expansions, failures)
    sol.mode = "hierarchical"
    sol.fallback = True
    sol.failed_refinements = failures
    return sol
