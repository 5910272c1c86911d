"""First-order terms, unification and SLD resolution over Horn programs.

Terms are plain Python values:

* a variable is a :class:`Var`;
* a constant is a ``str`` (symbol) or an ``int``;
* a compound term ``f(t1, ..., tn)`` is the tuple ``("f", t1, ..., tn)``.

Atoms use the same tuple layout, ``("p", t1, ..., tn)``; a zero-arity atom
is the 1-tuple ``("p",)``.  Tuples hash and compare in C, which keeps state
sets and search memo tables cheap.

The resolution engine works on private mutable variable cells with a trail,
so backtracking never copies substitutions.  Answers are reported with the
caller's variable names.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

Term = Union["Var", str, int, tuple]
Atom = tuple
Substitution = Dict[str, Term]


class Var:
    """A logic variable, compared by name."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __eq__(self, other):
        return type(other) is Var and other.name == self.name

    def __hash__(self):
        return hash(("?", self.name))

    def __repr__(self):
        return self.name

    def __lt__(self, other):
        return sort_key(self) < sort_key(other)


class LogicError(Exception):
    """Base class for resolution errors."""


class BudgetExceeded(LogicError):
    """The proof search hit its step or depth limit; the answer is unknown."""


class InstantiationError(LogicError):
    """A built-in was called with insufficiently instantiated arguments."""


class BuiltinTypeError(LogicError):
    """A built-in received an argument of the wrong kind."""


@dataclass(frozen=True)
class ProofBudget:
    max_steps: int = 100_000
    max_depth: int = 200

    def __post_init__(self):
        if self.max_steps <= 0 or self.max_depth <= 0:
            raise ValueError("proof budget limits must be positive")


DEFAULT_BUDGET = ProofBudget()


@dataclass(frozen=True)
class HornClause:
    head: Atom
    body: Tuple[Atom, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))

    @property
    def is_fact(self) -> bool:
        return not self.body

    def __str__(self):
        if not self.body:
            return term_str(self.head) + "."
        return f"{term_str(self.head)} :- {', '.join(term_str(b) for b in self.body)}."


@dataclass(frozen=True)
class ProofNode:
    """One resolved goal.  ``kind`` is ``rule``, ``fact``, ``state`` or ``builtin``."""

    atom: Atom
    kind: str
    clause: Optional[HornClause] = None
    children: Tuple["ProofNode", ...] = ()

    def leaves(self) -> Iterator["ProofNode"]:
        if self.kind == "rule":
            for child in self.children:
                yield from child.leaves()
        else:
            yield self


@dataclass(frozen=True)
class Derivation:
    goals: Tuple[Atom, ...]
    nodes: Tuple[ProofNode, ...] = field(default=())

    def leaves(self) -> Iterator[ProofNode]:
        for node in self.nodes:
            yield from node.leaves()


# -- term utilities ---------------------------------------------------------


def atom(pred: str, *args: Term) -> Atom:
    return (pred, *args)


def is_var(t) -> bool:
    return type(t) is Var


def term_vars(t, acc: Optional[list] = None) -> list:
    """Variables of ``t`` in first-occurrence order."""
    if acc is None:
        acc = []
    if type(t) is Var:
        if t not in acc:
            acc.append(t)
    elif type(t) is tuple:
        for x in t[1:]:
            term_vars(x, acc)
    return acc


def is_ground(t) -> bool:
    if type(t) is Var:
        return False
    if type(t) is tuple:
        return all(is_ground(x) for x in t[1:])
    return True


def substitute(t, subst: Mapping[str, Term]):
    """Apply ``subst`` to ``t`` (single pass; bindings are assumed idempotent)."""
    if type(t) is Var:
        return subst.get(t.name, t)
    if type(t) is tuple:
        return (t[0], *(substitute(x, subst) for x in t[1:]))
    return t


def term_str(t) -> str:
    if type(t) is Var:
        return t.name
    if type(t) is tuple:
        if len(t) == 1:
            return t[0]
        return f"{t[0]}({', '.join(term_str(x) for x in t[1:])})"
    return str(t)


def sort_key(t):
    """Total order over terms: integers, then symbols, then variables, then compounds."""
    tt = type(t)
    if tt is int:
        return (0, t, "")
    if tt is str:
        return (1, 0, t)
    if tt is Var:
        return (2, 0, t.name)
    return (3, len(t), t[0], tuple(sort_key(x) for x in t[1:]))


def atom_key(a: Atom):
    return (a[0], len(a), tuple(sort_key(x) for x in a[1:]))


# -- unification on public terms --------------------------------------------


def _walk(t, s):
    while type(t) is Var and t.name in s:
        t = s[t.name]
    return t


def _occurs_in(name, t, s) -> bool:
    t = _walk(t, s)
    if type(t) is Var:
        return t.name == name
    if type(t) is tuple:
        return any(_occurs_in(name, x, s) for x in t[1:])
    return False


def _resolve_full(t, s):
    t = _walk(t, s)
    if type(t) is tuple:
        return (t[0], *(_resolve_full(x, s) for x in t[1:]))
    return t


def unify(a: Term, b: Term, subst: Optional[Mapping[str, Term]] = None) -> Optional[Substitution]:
    """Most general unifier of ``a`` and ``b`` (occurs check on), or ``None``.

    The result is idempotent: no bound variable occurs in any binding.
    """
    s: Dict[str, Term] = dict(subst or {})
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x, y = _walk(x, s), _walk(y, s)
        if x == y and type(x) is type(y):
            continue
        if type(x) is Var:
            if _occurs_in(x.name, y, s):
                return None
            s[x.name] = y
        elif type(y) is Var:
            if _occurs_in(y.name, x, s):
                return None
            s[y.name] = x
        elif type(x) is tuple and type(y) is tuple:
            if len(x) != len(y) or x[0] != y[0]:
                return None
            stack.extend(zip(x[1:], y[1:]))
        else:
            return None
    return {k: _resolve_full(v, s) for k, v in s.items()}


# -- engine internals -------------------------------------------------------


class _Cell:
    """Runtime variable; ``ref is None`` while unbound."""

    __slots__ = ("ref", "name")

    def __init__(self, name):
        self.ref = None
        self.name = name


def _deref(t):
    while type(t) is _Cell:
        r = t.ref
        if r is None:
            return t
        t = r
    return t


def _occurs(cell, t) -> bool:
    t = _deref(t)
    if t is cell:
        return True
    if type(t) is tuple:
        for x in t[1:]:
            if _occurs(cell, x):
                return True
    return False


def _bind(cell, value, trail) -> bool:
    if type(value) is tuple and _occurs(cell, value):
        return False
    cell.ref = value
    trail.append(cell)
    return True


def _unify_rt(a, b, trail) -> bool:
    a = _deref(a)
    b = _deref(b)
    if a is b:
        return True
    ta = type(a)
    tb = type(b)
    if ta is _Cell:
        return _bind(a, b, trail)
    if tb is _Cell:
        return _bind(b, a, trail)
    if ta is tuple:
        if tb is not tuple or len(a) != len(b) or a[0] != b[0]:
            return False
        for x, y in zip(a[1:], b[1:]):
            if not _unify_rt(x, y, trail):
                return False
        return True
    return ta is tb and a == b


def _resolve_rt(t):
    """Fully dereference a runtime term (unbound cells are kept)."""
    t = _deref(t)
    if type(t) is tuple:
        return (t[0], *[_resolve_rt(x) for x in t[1:]])
    return t


def _ground_rt(t):
    """Fully dereferenced copy of ``t``, or ``None`` if it has an unbound cell."""
    t = _deref(t)
    tt = type(t)
    if tt is _Cell:
        return None
    if tt is tuple:
        out = [t[0]]
        for x in t[1:]:
            g = _ground_rt(x)
            if g is None:
                return None
            out.append(g)
        return tuple(out)
    return t


def _to_runtime(t, cells: Dict[str, _Cell]):
    if type(t) is Var:
        c = cells.get(t.name)
        if c is None:
            c = cells[t.name] = _Cell(t.name)
        return c
    if type(t) is tuple:
        return (t[0], *[_to_runtime(x, cells) for x in t[1:]])
    return t


def _from_runtime(t, names: Dict[int, Var]):
    t = _deref(t)
    if type(t) is _Cell:
        v = names.get(id(t))
        if v is None:
            v = names[id(t)] = Var(f"_G{len(names)}")
        return v
    if type(t) is tuple:
        return (t[0], *[_from_runtime(x, names) for x in t[1:]])
    return t


class _Compiled:
    __slots__ = ("clause", "fresh", "first")

    def __init__(self, clause: HornClause):
        self.clause = clause
        self.fresh = _codegen(clause)
        first = clause.head[1] if len(clause.head) > 1 else None
        # first-argument index key: a constant, or None for "matches anything"
        self.first = None if (first is None or type(first) is Var or type(first) is tuple) else first
        if type(first) is tuple:
            self.first = ("$compound",)


def _codegen(clause: HornClause):
    """Build a closure returning a freshly renamed ``(head, body)`` pair."""
    names: Dict[str, str] = {}
    consts: list = []

    def emit(t):
        if type(t) is Var:
            if t.name not in names:
                names[t.name] = f"v{len(names)}"
            return names[t.name]
        if type(t) is tuple and not is_ground(t):
            return "(" + "".join(emit(x) + ", " for x in t) + ")"
        consts.append(t)
        return f"K[{len(consts) - 1}]"

    head_src = emit(clause.head)
    body_src = "(" + "".join(emit(b) + ", " for b in clause.body) + ")"
    if not names:
        pair = (clause.head, tuple(clause.body))
        return lambda: pair
    lines = ["def fresh():"]
    lines += [f"    {local} = C({name!r})" for name, local in names.items()]
    lines.append(f"    return ({head_src}, {body_src})")
    scope = {"C": _Cell, "K": consts}
    exec("\n".join(lines), scope)
    return scope["fresh"]


class FactIndex:
    """Ground atoms indexed by predicate and by (predicate, first argument)."""

    __slots__ = ("members", "by_pred", "by_first")

    def __init__(self, atoms: Iterable[Atom]):
        self.members = atoms if isinstance(atoms, (set, frozenset)) else frozenset(atoms)
        by_pred: Dict[str, list] = {}
        by_first: Dict[tuple, list] = {}
        for a in sorted(self.members, key=atom_key):
            by_pred.setdefault(a[0], []).append(a)
            if len(a) > 1:
                by_first.setdefault((a[0], a[1]), []).append(a)
        self.by_pred = by_pred
        self.by_first = by_first


_EMPTY_FACTS = FactIndex(frozenset())
_HIT = (True,)


class Program:
    """A compiled Horn program: clauses grouped by predicate with first-argument indexing."""

    def __init__(self, clauses: Iterable[HornClause] = ()):
        self.clauses: Tuple[HornClause, ...] = tuple(clauses)
        self._by_pred: Dict[str, list] = {}
        for c in self.clauses:
            if c.head[0] in BUILTINS:
                raise ValueError(f"cannot redefine built-in {c.head[0]}")
            self._by_pred.setdefault(c.head[0], []).append(_Compiled(c))
        self._by_first: Dict[str, Dict[object, list]] = {}
        self._open: Dict[str, list] = {}
        for pred, comps in self._by_pred.items():
            keys = {c.first for c in comps if c.first is not None}
            self._open[pred] = [c for c in comps if c.first is None]
            self._by_first[pred] = {k: [c for c in comps if c.first is None or c.first == k] for k in keys}

    def extend(self, more: Iterable[HornClause]) -> "Program":
        return Program(self.clauses + tuple(more))

    def defines(self, pred: str) -> bool:
        return pred in self._by_pred

    def candidates(self, pred: str, first) -> list:
        comps = self._by_pred.get(pred)
        if comps is None:
            return []
        if first is None:
            return comps
        if type(first) is tuple:
            first = ("$compound",)
        return self._by_first[pred].get(first, self._open[pred])

    def __len__(self):
        return len(self.clauses)


# -- built-ins --------------------------------------------------------------


def _int_arg(t, name):
    t = _deref(t)
    if type(t) is _Cell:
        return None
    if type(t) is not int:
        raise BuiltinTypeError(f"{name}: expected an integer, got {term_str(_resolve_rt(t))}")
    return t


def _arith(goal, trail, op):
    if len(goal) != 4:
        raise BuiltinTypeError(f"{goal[0]} takes 3 arguments")
    a, b, c = (_int_arg(x, goal[0]) for x in goal[1:])
    if a is not None and b is not None:
        return _unify_rt(goal[3], op(a, b), trail)
    if op is _add:
        if a is not None and c is not None:
            return _unify_rt(goal[2], c - a, trail)
        if b is not None and c is not None:
            return _unify_rt(goal[1], c - b, trail)
    else:  # a - b = c
        if a is not None and c is not None:
            return _unify_rt(goal[2], a - c, trail)
        if b is not None and c is not None:
            return _unify_rt(goal[1], b + c, trail)
    raise InstantiationError(f"{goal[0]} needs two bound arguments")


def _add(a, b):
    return a + b


def _sub(a, b):
    return a - b


def _compare(goal, op):
    if len(goal) != 3:
        raise BuiltinTypeError(f"{goal[0]} takes 2 arguments")
    a = _int_arg(goal[1], goal[0])
    b = _int_arg(goal[2], goal[0])
    if a is None or b is None:
        raise InstantiationError(f"{goal[0]} needs ground arguments")
    return op(a, b)


def _equality(goal, want):
    if len(goal) != 3:
        raise BuiltinTypeError(f"{goal[0]} takes 2 arguments")
    a = _ground_rt(goal[1])
    b = _ground_rt(goal[2])
    if a is None or b is None:
        raise InstantiationError(f"{goal[0]} needs ground arguments")
    return (a == b and type(a) is type(b)) is want


BUILTINS = {
    "sum": lambda g, tr: _arith(g, tr, _add),
    "diff": lambda g, tr: _arith(g, tr, _sub),
    "lt": lambda g, tr: _compare(g, int.__lt__),
    "le": lambda g, tr: _compare(g, int.__le__),
    "eq": lambda g, tr: _equality(g, True),
    "neq": lambda g, tr: _equality(g, False),
    "naf": None,  # handled by the engine
}

BUILTIN_ARITY = {"sum": 3, "diff": 3, "lt": 2, "le": 2, "eq": 2, "neq": 2}


def _as_goal(t):
    t = _deref(t)
    if type(t) is str:
        return (t,)
    if type(t) is tuple:
        return t
    if type(t) is _Cell:
        raise InstantiationError("naf: unbound goal")
    raise BuiltinTypeError(f"naf: {t!r} is not a goal")


# -- the SLD machine --------------------------------------------------------


class _Engine:
    __slots__ = ("program", "facts", "max_steps", "max_depth", "steps", "trail")

    def __init__(self, program: Program, facts: FactIndex, budget: ProofBudget):
        self.program = program
        self.facts = facts
        self.max_steps = budget.max_steps
        self.max_depth = budget.max_depth
        self.steps = 0
        self.trail: List[_Cell] = []

    def _undo(self, mark):
        trail = self.trail
        while len(trail) > mark:
            trail.pop().ref = None

    def _alternatives(self, goal):
        """Candidate state facts and program clauses for ``goal``."""
        pred = goal[0]
        facts = self.facts
        if len(goal) == 1:
            first = None
            ground = goal
        else:
            first = _deref(goal[1])
            if type(first) is _Cell:
                first = None
                ground = None
            else:
                ground = _ground_rt(goal)
        if ground is not None:
            fact_alts = _HIT if ground in facts.members else ()
        elif first is not None and type(first) is not tuple:
            fact_alts = facts.by_first.get((pred, first), ())
        else:
            fact_alts = facts.by_pred.get(pred, ())
        return fact_alts, self.program.candidates(pred, first)

    def run(self, goals, want_trace: bool) -> Iterator[object]:
        """Enumerate solutions of the linked goal list; yields the trace of each."""
        trail = self.trail
        stack: list = []
        cont = goals
        trace = None
        while True:
            if cont is None:
                yield trace
            else:
                goal, depth, rest = cont
                self.steps += 1
                if self.steps > self.max_steps:
                    raise BudgetExceeded(f"more than {self.max_steps} inference steps")
                if depth > self.max_depth:
                    raise BudgetExceeded(f"derivation deeper than {self.max_depth}")
                pred = goal[0]
                if pred in BUILTINS:
                    if pred == "naf":
                        ok = not self._exists(goal[1:], depth + 1)
                    else:
                        mark = len(trail)
                        ok = BUILTINS[pred](goal, trail)
                        if not ok:
                            self._undo(mark)
                    if ok:
                        cont = rest
                        if want_trace:
                            trace = (("builtin", goal, None, 0), trace)
                        continue
                else:
                    fact_alts, clause_alts = self._alternatives(goal)
                    if fact_alts or clause_alts:
                        stack.append([fact_alts, clause_alts, 0, goal, depth, rest, trace, len(trail)])
            # backtrack into the most recent choice point
            cont = None
            resumed = False
            while stack:
                cp = stack[-1]
                fact_alts, clause_alts, i, goal, depth, rest, ptrace, mark = cp
                self._undo(mark)
                nf = len(fact_alts)
                n = nf + len(clause_alts)
                while i < n:
                    if i < nf:
                        alt = fact_alts[i]
                        i += 1
                        if alt is not True:
                            ok = True
                            for k in range(1, len(alt)):
                                if not _unify_rt(goal[k], alt[k], trail):
                                    ok = False
                                    break
                            if not ok:
                                self._undo(mark)
                                continue
                        cont = rest
                        if want_trace:
                            trace = (("state", goal, None, 0), ptrace)
                        resumed = True
                        break
                    comp = clause_alts[i - nf]
                    i += 1
                    head, body = comp.fresh()
                    if len(head) == len(goal) and _unify_rt(goal, head, trail):
                        nxt = rest
                        d = depth + 1
                        for b in reversed(body):
                            nxt = (b, d, nxt)
                        cont = nxt
                        if want_trace:
                            trace = (("rule" if body else "fact", goal, comp.clause, len(body)), ptrace)
                        resumed = True
                        break
                    self._undo(mark)
                if resumed:
                    if i >= n:
                        stack.pop()
                    else:
                        cp[2] = i
                    break
                stack.pop()
            if not resumed:
                return

    def _exists(self, goal_terms, depth) -> bool:
        goals = None
        for t in reversed(goal_terms):
            goals = (_as_goal(t), depth, goals)
        if goals is None:
            return True
        mark = len(self.trail)
        found = False
        gen = self.run(goals, False)
        try:
            for _ in gen:
                found = True
                break
        finally:
            gen.close()
            self._undo(mark)
        return found


def _build_tree(trace) -> List[ProofNode]:
    events = []
    while trace is not None:
        events.append(trace[0])
        trace = trace[1]
    events.reverse()
    pos = 0

    def build():
        nonlocal pos
        kind, goal, clause, nchildren = events[pos]
        pos += 1
        children = tuple(build() for _ in range(nchildren))
        return ProofNode(_resolve_rt(goal), kind, clause, children)

    nodes = []
    while pos < len(events):
        nodes.append(build())
    return nodes


def _link(goals: Sequence[Atom]):
    linked = None
    for g in reversed(goals):
        linked = (g, 0, linked)
    return linked


def _as_program(program) -> Program:
    if isinstance(program, Program):
        return program
    return Program(program)


def _as_facts(facts) -> FactIndex:
    if facts is None:
        return _EMPTY_FACTS
    if isinstance(facts, FactIndex):
        return facts
    index = getattr(facts, "index", None)
    if isinstance(index, FactIndex):
        return index
    return FactIndex(facts)


def iter_answers(program, goals: Sequence[Atom], facts=None, budget: ProofBudget = DEFAULT_BUDGET,
                 proofs: bool = True) -> Iterator[Tuple[Substitution, Optional[Derivation]]]:
    """Lazily enumerate ``(answer, derivation)`` pairs in SLD order.

    ``program`` is a :class:`Program` or an iterable of clauses; ``facts`` is
    an optional set of ground atoms treated as extra facts tried before the
    program's own clauses.
    """
    prog = _as_program(program)
    index = _as_facts(facts)
    cells: Dict[str, _Cell] = {}
    rt_goals = [_to_runtime(g, cells) for g in goals]
    query_vars = [v.name for g in goals for v in term_vars(g)]
    query_vars = list(dict.fromkeys(query_vars))
    engine = _Engine(prog, index, budget)
    for trace in engine.run(_link(rt_goals), proofs):
        names: Dict[int, Var] = {}
        answer = {name: _from_runtime(cells[name], names) for name in query_vars}
        answer = {k: v for k, v in answer.items() if not (type(v) is Var and v.name == k)}
        derivation = None
        if proofs:
            nodes = _build_tree(trace)
            derivation = Derivation(tuple(substitute(g, answer) for g in goals),
                                    tuple(_strip(n, names) for n in nodes))
        yield answer, derivation


def _strip(node: ProofNode, names) -> ProofNode:
    """Replace runtime cells left in a proof tree by named variables."""
    return ProofNode(_from_runtime(node.atom, names), node.kind, node.clause,
                     tuple(_strip(c, names) for c in node.children))


def sld_prove(program, goals: Sequence[Atom], budget: ProofBudget = DEFAULT_BUDGET, facts=None,
              proofs: bool = True) -> List[Tuple[Substitution, Optional[Derivation]]]:
    """All SLD answers for the goal conjunction, one per successful branch."""
    return list(iter_answers(program, goals, facts, budget, proofs))


def provable(program, goals: Sequence[Atom], facts=None, budget: ProofBudget = DEFAULT_BUDGET) -> bool:
    for _ in iter_answers(program, goals, facts, budget, proofs=False):
        return True
    return False


def eval_builtin(goal: Atom, bindings: Optional[Mapping[str, Term]] = None) -> List[Substitution]:
    """Evaluate one built-in literal under ``bindings``; returns the extended bindings (0 or 1)."""
    if goal[0] not in BUILTINS:
        raise ValueError(f"{goal[0]} is not a built-in")
    bindings = dict(bindings or {})
    g = substitute(goal, bindings)
    out = []
    for answer, _ in iter_answers(Program(), [g], proofs=False):
        merged = {k: substitute(v, answer) for k, v in bindings.items()}
        merged.update(answer)
        out.append(merged)
    return out


def naf(program, goals: Sequence[Atom], facts=None, budget: ProofBudget = DEFAULT_BUDGET) -> bool:
    """Negation as finite failure of a goal conjunction."""
    return not provable(program, goals, facts, budget)


def essential_leaves(derivation: Derivation, essentials) -> frozenset:
    """State-atom leaves of ``derivation`` whose predicate is essential.

    ``essentials`` may hold predicate names or ``(name, arity)`` signatures.
    """
    out = set()
    for leaf in derivation.leaves():
        if leaf.kind != "state":
            continue
        a = leaf.atom
        if a[0] in essentials or (a[0], len(a) - 1) in essentials:
            out.add(a)
    return frozenset(out)


def fresh_vars(prefix: str = "_V") -> Iterator[Var]:
    for i in itertools.count():
        yield Var(f"{prefix}{i}")
