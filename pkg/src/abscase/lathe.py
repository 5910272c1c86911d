"""The lathe process-planning domain: builders, the two-sided example workpiece, and a case generator."""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

from .domain import AbstractionTheory, Domain, PlanningCase, Problem, State, execute_plan, plan_is_valid, resolve_plan, successors
from .dsl import parse_case, parse_domain, parse_theory
from .logic import DEFAULT_BUDGET, ProofBudget

JAW_LENGTH = 200  # tenths of a millimetre gripped at either end
SMALL_WIDTH = 30  # columns up to 3 mm wide count as small


def _source(name: str) -> str:
    return resources.files(__package__).joinpath("domains").joinpath("lathe").joinpath(name).read_text(encoding="utf-8")


def build_domains() -> Tuple[Domain, Domain, AbstractionTheory]:
    concrete = parse_domain(_source("lathe.pdom"))
    abstract = parse_domain(_source("lathe_abs.pdom"))
    theory = parse_theory(_source("lathe.pabs"), concrete, abstract)
    return concrete, abstract, theory


def build_ablated_abstract_domain() -> Tuple[Domain, AbstractionTheory]:
    """Abstract domain without the chucking operator or any chucking conditions."""
    concrete = parse_domain(_source("lathe.pdom"))
    abstract = parse_domain(_source("lathe_abs_ablated.pdom"))
    return abstract, parse_theory(_source("lathe.pabs"), concrete, abstract)


@dataclass(frozen=True)
class WorkpieceSpec:
    """Grid geometry plus, per column, the initial material top and the finished-workpiece top.

    Rows are numbered from 1 at the axis.  Cells up to ``goal_tops[x]`` belong
    to the finished workpiece, cells above it up to ``mold_tops[x]`` are raw
    material, and cells above the mold are empty.
    """

    widths: Tuple[int, ...]
    heights: Tuple[int, ...]
    mold_tops: Tuple[int, ...]
    goal_tops: Tuple[int, ...]

    def __post_init__(self):
        n, m = len(self.widths), len(self.heights)
        if not n or not m:
            raise ValueError("empty grid")
        if len(self.mold_tops) != n or len(self.goal_tops) != n:
            raise ValueError("one mold top and one goal top per column")
        if any(w <= 0 for w in self.widths + self.heights):
            raise ValueError("cell sizes must be positive")
        for g, t in zip(self.goal_tops, self.mold_tops):
            if not 0 <= g <= t <= m:
                raise ValueError("need 0 <= goal top <= mold top <= rows")

    def geometry(self) -> List[tuple]:
        atoms = [("xpos_max", len(self.widths)), ("ypos_max", len(self.heights))]
        for axis, sizes in (("grid_xpos", self.widths), ("grid_ypos", self.heights)):
            start = 0
            for k, size in enumerate(sizes, 1):
                atoms.append((axis, k, start, size))
                start += size
        return atoms

    def cells(self, final: bool) -> List[tuple]:
        out = []
        for x, (mold, goal) in enumerate(zip(self.mold_tops, self.goal_tops), 1):
            for y in range(1, len(self.heights) + 1):
                if y <= goal:
                    status = "workpiece"
                elif y <= mold and not final:
                    status = "raw"
                else:
                    status = "none"
                out.append(("mat", x, y, status))
        return out

    def problem(self, name: str = "") -> Problem:
        idle = [("chuck_pos", "none"), ("cut_tool", "none"), ("cut_direction", "none")]
        geo = self.geometry()
        return Problem(State(geo + self.cells(False) + idle), State(geo + self.cells(True) + idle), name)

    @property
    def raw_cells(self) -> int:
        return sum(t - g for t, g in zip(self.mold_tops, self.goal_tops))

    def zones(self) -> Tuple[List[int], List[int]]:
        """Columns gripped by a chuck on the left and on the right."""
        total = sum(self.widths)
        starts = list(itertools.accumulate((0,) + self.widths[:-1]))
        left = [x for x, s in enumerate(starts, 1) if s < JAW_LENGTH]
        right = [x for x, (s, w) in enumerate(zip(starts, self.widths), 1) if total - (s + w) < JAW_LENGTH]
        return left, right


FIGURE9 = WorkpieceSpec(
    widths=(180, 20, 1650, 400),
    heights=(80, 60, 60, 60, 80),
    mold_tops=(5, 5, 5, 5),
    goal_tops=(4, 2, 4, 1),
)

FIGURE9_PLAN = (
    ("chuck", ("left", 1, 2)),
    ("use_tool", ("t_rough_r", "right", "none", "none")),
    ("cut", (4, 5)), ("cut", (4, 4)), ("cut", (4, 3)), ("cut", (4, 2)), ("cut", (3, 5)),
    ("unchuck", ("left", 1, 2, "t_rough_r", "right")),
    ("chuck", ("right", 4, 4)),
    ("use_tool", ("t_rough_l", "left", "none", "none")),
    ("cut", (1, 5)),
    ("use_tool", ("t_groove", "center", "t_rough_l", "left")),
    ("cut", (2, 5)), ("cut", (2, 4)), ("cut", (2, 3)),
    ("unchuck", ("right", 4, 4, "t_groove", "center")),
)


def figure9_fixture(concrete: Optional[Domain] = None) -> PlanningCase:
    """The four-column workpiece with a groove near the left end and its 16-step plan."""
    concrete = concrete or build_domains()[0]
    return parse_case(_source("figure9.pcase"), concrete)


def figure9_case_from_spec(concrete: Domain) -> PlanningCase:
    return PlanningCase(FIGURE9.problem("figure9"), resolve_plan(concrete, FIGURE9_PLAN), "figure9")


# -- reference plans --------------------------------------------------------


def _raw_left(state: State) -> int:
    return sum(1 for a in state.index.by_pred.get("mat", ()) if a[3] == "raw")


def _heuristic(state: State) -> int:
    chucked = 0 if ("chuck_pos", "none") in state else 1
    return _raw_left(state) + chucked


class SearchExhausted(Exception):
    pass


def reference_plan(problem: Problem, concrete: Domain, max_nodes: int = 50_000,
                   budget: ProofBudget = DEFAULT_BUDGET) -> Tuple:
    """Shortest plan by A*; every cut and the final unchuck are each one step, so the estimate never overshoots."""
    tie = itertools.count()
    start = problem.initial
    frontier = [(_heuristic(start), 0, next(tie), start)]
    parent: Dict[State, Tuple[Optional[State], object]] = {start: (None, None)}
    cost = {start: 0}
    closed = set()
    while frontier:
        _, g, _, state = heapq.heappop(frontier)
        if state in closed:
            continue
        if problem.goal <= state:
            plan = []
            while parent[state][0] is not None:
                prev, op = parent[state]
                plan.append(op)
                state = prev
            return tuple(reversed(plan))
        closed.add(state)
        if len(closed) > max_nodes:
            raise SearchExhausted(f"more than {max_nodes} states")
        for op, nxt in successors(state, concrete, budget):
            if nxt in closed or cost.get(nxt, g + 2) <= g + 1:
                continue
            cost[nxt] = g + 1
            parent[nxt] = (state, op)
            heapq.heappush(frontier, (g + 1 + _heuristic(nxt), g + 1, next(tie), nxt))
    raise SearchExhausted("goal unreachable")


def prune_redundant(case: PlanningCase, concrete: Domain) -> PlanningCase:
    """Drop steps left to right whenever the plan stays valid without them."""
    plan = list(case.plan)
    i = 0
    while i < len(plan):
        trial = plan[:i] + plan[i + 1:]
        if plan_is_valid(PlanningCase(case.problem, tuple(trial)), concrete):
            plan = trial
        else:
            i += 1
    return PlanningCase(case.problem, tuple(plan), case.name)


def branching_factor(case: PlanningCase, concrete: Domain) -> float:
    """Mean number of successors over the non-final states the plan visits."""
    states = execute_plan(case, concrete)[:-1]
    if not states:
        return 0.0
    return sum(len(successors(s, concrete)) for s in states) / len(states)


# -- random cases -----------------------------------------------------------


@dataclass(frozen=True)
class GenerationParams:
    seed: int = 1
    count: int = 25
    columns: Tuple[int, int] = (6, 8)
    rows: Tuple[int, int] = (13, 16)
    grooves: Tuple[int, int] = (0, 3)
    plan_length: Tuple[int, int] = (6, 18)
    atoms: Tuple[int, int] = (100, 300)
    max_attempts: int = 2000
    search_nodes: int = 50_000

    def __post_init__(self):
        for lo, hi in (self.columns, self.rows, self.grooves, self.plan_length, self.atoms):
            if lo > hi:
                raise ValueError("empty range in generation parameters")
        if self.columns[0] < 4 or self.count < 0:
            raise ValueError("need at least four columns")


class GenerationExhausted(Exception):
    pass


def random_workpiece(rng: random.Random, params: GenerationParams) -> WorkpieceSpec:
    n = rng.randint(*params.columns)
    m = rng.randint(*params.rows)
    grooves = rng.randint(*params.grooves)
    # grooves sit strictly inside, never next to each other
    inner = list(range(1, n - 1))
    rng.shuffle(inner)
    chosen = set()
    for x in inner:
        if len(chosen) == grooves:
            break
        if x - 1 not in chosen and x + 1 not in chosen:
            chosen.add(x)
    widths = []
    for x in range(n):
        if x in chosen:
            widths.append(rng.randint(10, SMALL_WIDTH))
        elif x in (0, n - 1):
            widths.append(rng.randint(60, 190))
        else:
            widths.append(rng.randint(40, 900))
    heights = tuple(rng.randint(20, 80) for _ in range(m))
    # wide columns rise towards one peak so each can be reached from its lower
    # side; the peak lies between the chuck zones so both ends face outwards
    starts = list(itertools.accumulate([0] + widths[:-1]))
    total = sum(widths)
    middle = [x for x in range(n) if starts[x] >= JAW_LENGTH and total - starts[x] - widths[x] >= JAW_LENGTH
              and x not in chosen]
    peak = rng.choice(middle) if middle else n // 2
    base = [m] * n
    for x in range(peak - 1, -1, -1):
        base[x] = max(m - 3, base[x + 1] - rng.randint(0, 1))
    for x in range(peak + 1, n):
        base[x] = max(m - 3, base[x - 1] - rng.randint(0, 1))
    goal = []
    for x in range(n):
        if x in chosen:
            neighbours = min(base[x - 1], base[x + 1])
            goal.append(max(1, neighbours - rng.randint(1, 3)))
        else:
            goal.append(base[x])
    return WorkpieceSpec(tuple(widths), heights, tuple([m] * n), tuple(goal))


def _usable(spec: WorkpieceSpec) -> bool:
    left, right = spec.zones()
    if not left or not right or set(left) & set(right):
        return False
    return len(left) + len(right) < len(spec.widths)


def generate_problems(params: GenerationParams = GenerationParams(),
                      concrete: Optional[Domain] = None) -> List[PlanningCase]:
    """Seeded random workpieces with shortest reference plans, filtered to the requested ranges."""
    concrete = concrete or build_domains()[0]
    rng = random.Random(params.seed)
    cases: List[PlanningCase] = []
    attempts = 0
    while len(cases) < params.count:
        attempts += 1
        if attempts > params.max_attempts:
            raise GenerationExhausted(f"only {len(cases)} of {params.count} cases after {params.max_attempts} attempts")
        spec = random_workpiece(rng, params)
        if not _usable(spec):
            continue
        if spec.raw_cells + 3 > params.plan_length[1] or spec.raw_cells + 3 < params.plan_length[0]:
            continue
        name = f"lathe_s{params.seed}_{len(cases):03d}"
        problem = spec.problem(name)
        if not params.atoms[0] <= len(problem.initial) <= params.atoms[1]:
            continue
        try:
            plan = reference_plan(problem, concrete, params.search_nodes)
        except SearchExhausted:
            continue
        case = prune_redundant(PlanningCase(problem, plan, name), concrete)
        if not params.plan_length[0] <= len(case.plan) <= params.plan_length[1]:
            continue
        cases.append(case)
    return cases
