"""STRIPS-style domains: states, operator schemas, instantiation and plan execution."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .logic import (
    BUILTINS,
    DEFAULT_BUDGET,
    Atom,
    FactIndex,
    HornClause,
    Program,
    ProofBudget,
    Var,
    atom_key,
    eval_builtin,
    is_ground,
    iter_answers,
    provable,
    sort_key,
    substitute,
    term_str,
    term_vars,
)


class State(frozenset):
    """A finite set of ground essential atoms.

    Iteration order of the underlying set is arbitrary; :meth:`sorted` gives
    the canonical order used for printing and anything order-sensitive.
    The fact index used by the prover is built on first use and cached.
    """

    __slots__ = ("_index",)

    @property
    def index(self) -> FactIndex:
        try:
            return self._index
        except AttributeError:
            self._index = FactIndex(self)
            return self._index

    def sorted(self) -> List[Atom]:
        return sorted(self, key=atom_key)

    def __repr__(self):
        return "{" + ", ".join(term_str(a) for a in self.sorted()) + "}"


EMPTY_STATE = State()


@dataclass(frozen=True)
class OperatorSchema:
    name: str
    params: Tuple[Var, ...] = ()
    pre: Tuple[Atom, ...] = ()
    add: Tuple[Atom, ...] = ()
    delete: Tuple[Atom, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "pre", tuple(self.pre))
        # add and delete lists are sets; keep them in canonical order
        object.__setattr__(self, "add", tuple(sorted(set(self.add), key=atom_key)))
        object.__setattr__(self, "delete", tuple(sorted(set(self.delete), key=atom_key)))

    def scope_violations(self) -> List[str]:
        """Names of variables breaking the pre/add/del scoping rules."""
        params = set(self.params)
        pre_vars = {v for a in self.pre for v in term_vars(a)}
        problems = []
        for v in sorted(pre_vars - params, key=lambda v: v.name):
            problems.append(f"variable {v.name} in pre is not a parameter")
        for v in sorted({v for a in self.delete for v in term_vars(a)} - pre_vars, key=lambda v: v.name):
            problems.append(f"variable {v.name} in del does not occur in pre")
        for v in sorted({v for a in self.add for v in term_vars(a)} - params, key=lambda v: v.name):
            problems.append(f"variable {v.name} in add is not a parameter")
        return problems


@dataclass(frozen=True, eq=False)
class Operator:
    """A ground operator instance.  Two instances are equal when name and arguments agree."""

    name: str
    args: Tuple = ()
    pre: Tuple[Atom, ...] = ()
    add: frozenset = frozenset()
    delete: frozenset = frozenset()

    def __eq__(self, other):
        return isinstance(other, Operator) and self.name == other.name and self.args == other.args

    def __hash__(self):
        return hash((self.name, self.args))

    def __str__(self):
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(term_str(a) for a in self.args)})"

    __repr__ = __str__

    @property
    def key(self):
        return (self.name, self.args)


@dataclass(frozen=True)
class Domain:
    name: str
    essentials: Mapping[str, int]
    rules: Tuple[HornClause, ...] = ()
    operators: Tuple[OperatorSchema, ...] = ()
    _program: Program = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "essentials", dict(self.essentials))
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "operators", tuple(self.operators))

    @property
    def program(self) -> Program:
        if self._program is None:
            object.__setattr__(self, "_program", Program(self.rules))
        return self._program

    def operator(self, name: str) -> OperatorSchema:
        for schema in self.operators:
            if schema.name == name:
                return schema
        raise KeyError(f"domain {self.name} has no operator {name}")

    def defined_predicates(self) -> Dict[str, int]:
        """Predicates the domain mentions: essentials plus rule heads."""
        preds = dict(self.essentials)
        for r in self.rules:
            preds.setdefault(r.head[0], len(r.head) - 1)
        return preds

    def invalid_atoms(self, atoms: Iterable[Atom]) -> List[Atom]:
        return [a for a in atoms
                if self.essentials.get(a[0]) != len(a) - 1 or not is_ground(a)]

    def make_state(self, atoms: Iterable[Atom]) -> State:
        state = State(atoms)
        bad = self.invalid_atoms(state)
        if bad:
            raise ValueError(f"not ground essential atoms of {self.name}: "
                             + ", ".join(term_str(a) for a in bad))
        return state


@dataclass(frozen=True)
class Problem:
    initial: State
    goal: State
    name: str = ""


@dataclass(frozen=True)
class PlanningCase:
    problem: Problem
    plan: Tuple[Operator, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "plan", tuple(self.plan))


class PlanError(Exception):
    def __init__(self, message, index=None, state=None):
        super().__init__(message)
        self.index = index
        self.state = state


class OperatorNotApplicable(PlanError):
    pass


class GoalNotReached(PlanError):
    pass


class SchemaError(Exception):
    pass


def _complete_bindings(schema: OperatorSchema, binding: Dict[str, object]) -> Dict[str, object]:
    """Fill parameters that the precondition computes with arithmetic built-ins."""
    for lit in schema.pre:
        if lit[0] in BUILTINS and lit[0] != "naf":
            g = substitute(lit, binding)
            if is_ground(g):
                continue
            results = eval_builtin(g)
            if results:
                binding.update(results[0])
    return binding


def instantiate(schema: OperatorSchema, args: Sequence) -> Operator:
    """Ground ``schema`` with ``args``.

    ``args`` may omit trailing parameters that the precondition computes
    through arithmetic built-ins (``inc(3)`` yields ``inc(3, 4)``).
    """
    args = tuple(args)
    if len(args) > len(schema.params):
        raise SchemaError(f"{schema.name} takes {len(schema.params)} arguments, got {len(args)}")
    for a in args:
        if not is_ground(a):
            raise SchemaError(f"{schema.name}: argument {term_str(a)} is not ground")
    binding = {p.name: a for p, a in zip(schema.params, args)}
    if len(args) < len(schema.params):
        binding = _complete_bindings(schema, binding)
        missing = [p.name for p in schema.params if p.name not in binding]
        if missing:
            raise SchemaError(f"{schema.name} takes {len(schema.params)} arguments, got {len(args)}")
    return _ground_instance(schema, binding)


def _ground_instance(schema: OperatorSchema, binding: Mapping[str, object]) -> Operator:
    return Operator(
        schema.name,
        tuple(binding[p.name] for p in schema.params),
        tuple(substitute(a, binding) for a in schema.pre),
        frozenset(substitute(a, binding) for a in schema.add),
        frozenset(substitute(a, binding) for a in schema.delete),
    )


def applicable_instantiations(state: State, schema: OperatorSchema, rules, budget: ProofBudget = DEFAULT_BUDGET,
                              bindings: Optional[Mapping[str, object]] = None) -> List[Operator]:
    """Ground instances of ``schema`` whose precondition holds in ``state``, in SLD answer order.

    ``rules`` is a :class:`Program` or iterable of clauses.  ``bindings`` may
    fix parameters that the precondition leaves open.
    """
    fixed = dict(bindings or {})
    pre = [substitute(a, fixed) for a in schema.pre] if fixed else list(schema.pre)
    out: List[Operator] = []
    seen = set()
    facts = state.index if isinstance(state, State) else state
    for answer, _ in iter_answers(rules, pre, facts, budget, proofs=False):
        binding = dict(fixed)
        binding.update(answer)
        args = []
        for p in schema.params:
            value = binding.get(p.name)
            if value is None or not is_ground(value):
                raise SchemaError(f"{schema.name}: parameter {p.name} is not bound by the precondition")
            args.append(value)
        key = tuple(args)
        if key in seen:
            continue
        seen.add(key)
        out.append(_ground_instance(schema, binding))
    return out


def successors(state: State, domain: Domain, budget: ProofBudget = DEFAULT_BUDGET) -> List[Tuple[Operator, State]]:
    """All (operator, next state) pairs, operators in declaration order."""
    out = []
    program = domain.program
    for schema in domain.operators:
        for op in applicable_instantiations(state, schema, program, budget):
            out.append((op, apply(state, op)))
    return out


def is_applicable(state: State, op: Operator, rules, budget: ProofBudget = DEFAULT_BUDGET) -> bool:
    facts = state.index if isinstance(state, State) else state
    return provable(rules, list(op.pre), facts, budget)


def apply(state: State, op: Operator) -> State:
    if not op.delete and not op.add:
        return state if isinstance(state, State) else State(state)
    return State((state - op.delete) | op.add)


def goal_satisfied(state, goal) -> bool:
    return goal <= state


def execute_plan(case: PlanningCase, domain: Domain, budget: ProofBudget = DEFAULT_BUDGET,
                 check_goal: bool = True) -> List[State]:
    """States s_0..s_n visited by the case's plan; raises :class:`PlanError` on failure."""
    state = case.problem.initial
    states = [state]
    program = domain.program
    for i, op in enumerate(case.plan):
        if not is_applicable(state, op, program, budget):
            raise OperatorNotApplicable(f"operator {i + 1} ({op}) is not applicable", i, state)
        state = apply(state, op)
        states.append(state)
    if check_goal and not goal_satisfied(state, case.problem.goal):
        missing = sorted(case.problem.goal - state, key=atom_key)
        raise GoalNotReached("goal not reached; missing " + ", ".join(term_str(a) for a in missing),
                             len(case.plan), state)
    return states


def plan_is_valid(case: PlanningCase, domain: Domain, budget: ProofBudget = DEFAULT_BUDGET) -> bool:
    try:
        execute_plan(case, domain, budget)
    except PlanError:
        return False
    return True


def resolve_plan(domain: Domain, steps: Iterable[Tuple[str, Sequence]]) -> Tuple[Operator, ...]:
    """Instantiate ``(name, args)`` pairs against the domain's schemas."""
    return tuple(instantiate(domain.operator(name), args) for name, args in steps)


def state_constants(atoms: Iterable[Atom]) -> List:
    out = set()

    def walk(t):
        if type(t) is tuple:
            for x in t[1:]:
                walk(x)
        elif type(t) is not Var:
            out.add(t)

    for a in atoms:
        walk(a)
    return sorted(out, key=sort_key)


@dataclass(frozen=True)
class AbstractionTheory:
    """Rules deriving abstract essential atoms from concrete (and abstract) ones."""

    rules: Tuple[HornClause, ...] = ()
    name: str = ""
    concrete: str = ""
    abstract: str = ""

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))


@dataclass(frozen=True, eq=False)
class AbstractCase:
    """An abstract problem with its abstract plan, plus where it came from.

    Equality and hashing use the problem endpoints and the plan only, so
    the same case learned through different sequence maps is one case.
    """

    problem: Problem
    plan: Tuple[Operator, ...] = ()
    source: str = ""
    beta: Tuple[int, ...] = ()
    alpha: frozenset = frozenset()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "plan", tuple(self.plan))
        object.__setattr__(self, "beta", tuple(self.beta))
        object.__setattr__(self, "alpha", frozenset(self.alpha))

    @property
    def key(self):
        return (self.problem.initial, self.problem.goal, tuple(op.key for op in self.plan))

    def __eq__(self, other):
        return isinstance(other, AbstractCase) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __len__(self):
        return len(self.plan)

    def __repr__(self):
        plan = ", ".join(str(op) for op in self.plan)
        return f"AbstractCase({self.problem.initial!r} -> {self.problem.goal!r}: [{plan}])"
