"""Text format for domains, abstraction theories, problems, cases and case-base indexes.

Grammar (``%`` starts a comment that runs to the end of the line)::

    domain      := "domain" NAME "." section*
    section     := "essentials" (NAME "/" INT ".")*
                 | "rules" clause*
                 | "operator" NAME ["(" VAR ("," VAR)* ")"]
                       ["pre" ":" atoms? "."] ["add" ":" atoms? "."] ["del" ":" atoms? "."]
    theory      := "theory" NAME "from" NAME "to" NAME "." "rules" clause*
    problem     := "problem" NAME "for" NAME "." "init" ":" atoms? "." "goal" ":" atoms? "."
    case        := "case" NAME "for" NAME "." init goal "plan" ":" ops? "."
                   ["source" ":" NAME "."] ["beta" ":" INT ("," INT)* "."] ["alpha" ":" atoms? "."]
    clause      := atom [":-" atoms] "."
    atom        := NAME ["(" term ("," term)* ")"]
    term        := VAR | INT | NAME ["(" term ("," term)* ")"]

Names start with a lowercase letter, variables with an uppercase letter or
``_`` (a lone ``_`` is anonymous).  Integers are the only numeric literals.
A case base index (``casebase.idx``) lists one ``<file> <plan length>`` per
line, longest plans first.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .domain import (
    AbstractCase,
    AbstractionTheory,
    Domain,
    Operator,
    OperatorSchema,
    PlanningCase,
    Problem,
    SchemaError,
    State,
    instantiate,
)
from .logic import BUILTIN_ARITY, BUILTINS, HornClause, Var, atom_key, is_ground, term_str, term_vars

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<neck>:-)
  | (?P<int>-?[0-9]+)
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<punct>[(),.:/])
    """,
    re.VERBOSE,
)

_MAX_NESTING = 100


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    start: int
    end: int
    line: int
    column: int

    def __str__(self):
        return f"{self.line}:{self.column}: {self.severity} {self.code}: {self.message}"


class DSLError(Exception):
    """Raised when a source text has errors; carries every diagnostic found."""

    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))

    @property
    def codes(self) -> List[str]:
        return [d.code for d in self.diagnostics if d.severity == "error"]


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    start: int
    end: int


class _Abort(Exception):
    pass


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.diags: List[Diagnostic] = []
        self.toks: List[_Tok] = []
        self.pos = 0
        self._anon = 0
        self.depth = 0
        self._line_starts = [0] + [m.end() for m in re.finditer("\n", text)]
        self._lex()

    # diagnostics -------------------------------------------------------

    def _linecol(self, offset: int) -> Tuple[int, int]:
        lo, hi = 0, len(self._line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self._line_starts[mid] <= offset:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, offset - self._line_starts[lo] + 1

    def report(self, code: str, message: str, start: int, end: int, severity: str = "error"):
        start = max(0, min(start, len(self.text)))
        end = max(start, min(end, len(self.text)))
        line, col = self._linecol(start)
        self.diags.append(Diagnostic(severity, code, message, start, end, line, col))

    def report_at(self, tok: Optional[_Tok], code: str, message: str, severity: str = "error"):
        if tok is None:
            self.report(code, message, len(self.text), len(self.text), severity)
        else:
            self.report(code, message, tok.start, tok.end, severity)

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.diags)

    # lexing ------------------------------------------------------------

    def _lex(self):
        text = self.text
        pos = 0
        n = len(text)
        while pos < n:
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                j = pos + 1
                while j < n and _TOKEN_RE.match(text, j) is None:
                    j += 1
                self.report("E-LEX", f"unexpected character {text[pos]!r}", pos, j)
                pos = j
                continue
            kind = m.lastgroup
            if kind not in ("ws", "comment"):
                tok_text = m.group()
                if kind == "punct":
                    kind = tok_text
                self.toks.append(_Tok(kind, tok_text, m.start(), m.end()))
            pos = m.end()

    # token helpers -----------------------------------------------------

    def peek(self, k: int = 0) -> Optional[_Tok]:
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else None

    def at(self, kind: str, text: Optional[str] = None, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.kind == kind and (text is None or t.text == text)

    def at_keyword(self, *words: str) -> bool:
        t = self.peek()
        return t is not None and t.kind == "name" and t.text in words

    def take(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str, what: str, text: Optional[str] = None) -> _Tok:
        t = self.peek()
        if t is None or t.kind != kind or (text is not None and t.text != text):
            found = "end of input" if t is None else repr(t.text)
            self.report_at(t, "E-SYNTAX", f"expected {what}, found {found}")
            raise _Abort()
        return self.take()

    def int_value(self, t: _Tok) -> int:
        if len(t.text.lstrip("-")) > 18:
            self.report_at(t, "E-INT-RANGE", "integer literal out of range")
            return 0
        return int(t.text)

    def recover(self):
        """Skip to just past the next '.'."""
        self.depth = 0
        while self.pos < len(self.toks):
            if self.take().kind == ".":
                return

    # grammar -----------------------------------------------------------

    def term(self, scope: Dict[str, Var]):
        if self.depth > _MAX_NESTING:
            self.report_at(self.peek(), "E-NESTING", "terms nested too deeply")
            raise _Abort()
        t = self.peek()
        if t is None:
            self.report_at(None, "E-SYNTAX", "expected a term, found end of input")
            raise _Abort()
        if t.kind == "var":
            self.take()
            name = t.text
            if name == "_":
                self._anon += 1
                name = f"_{self._anon}"
                while name in scope:
                    self._anon += 1
                    name = f"_{self._anon}"
            v = scope.get(name)
            if v is None:
                v = scope[name] = Var(name)
            return v
        if t.kind == "int":
            self.take()
            return self.int_value(t)
        if t.kind == "name":
            return self.compound(scope)
        self.report_at(t, "E-SYNTAX", f"expected a term, found {t.text!r}")
        raise _Abort()

    def compound(self, scope: Dict[str, Var]):
        name = self.expect("name", "a name")
        if not self.at("("):
            return name.text
        self.take()
        self.depth += 1
        args = [self.term(scope)]
        while self.at(","):
            self.take()
            args.append(self.term(scope))
        self.expect(")", "')'")
        self.depth -= 1
        return (name.text, *args)

    def atom(self, scope: Dict[str, Var]) -> Tuple[tuple, _Tok]:
        t = self.peek()
        if t is None or t.kind != "name":
            found = "end of input" if t is None else repr(t.text)
            self.report_at(t, "E-SYNTAX", f"expected an atom, found {found}")
            raise _Abort()
        value = self.compound(scope)
        if type(value) is str:
            value = (value,)
        return value, t

    def atoms(self, scope: Dict[str, Var]) -> List[Tuple[tuple, _Tok]]:
        """A possibly empty comma-separated atom list terminated by '.' (consumed)."""
        out = []
        if self.at("."):
            self.take()
            return out
        out.append(self.atom(scope))
        while self.at(","):
            self.take()
            out.append(self.atom(scope))
        self.expect(".", "'.'")
        return out

    def clause(self) -> Tuple[HornClause, _Tok, List[Tuple[tuple, _Tok]]]:
        self._anon = 0
        scope: Dict[str, Var] = {}
        head, tok = self.atom(scope)
        body: List[Tuple[tuple, _Tok]] = []
        if self.at("neck"):
            self.take()
            body.append(self.atom(scope))
            while self.at(","):
                self.take()
                body.append(self.atom(scope))
        self.expect(".", "'.' after clause")
        return HornClause(head, tuple(b for b, _ in body)), tok, body

    def header(self, keyword: str) -> _Tok:
        t = self.peek()
        if t is None or t.kind != "name" or t.text != keyword:
            found = "end of input" if t is None else repr(t.text)
            self.report_at(t, "E-HEADER", f"expected '{keyword}' header, found {found}")
            raise _Abort()
        self.take()
        return self.expect("name", f"a {keyword} name")

    def end(self):
        t = self.peek()
        if t is not None:
            self.report_at(t, "E-SYNTAX", f"unexpected {t.text!r}")
            raise _Abort()


# -- domains ---------------------------------------------------------------

_DOMAIN_KEYWORDS = ("essentials", "rules", "operator")


def _parse_domain_raw(p: _Parser):
    name_tok = p.header("domain")
    p.expect(".", "'.'")
    essentials: List[Tuple[str, int, _Tok]] = []
    rules: List[Tuple[HornClause, _Tok, list]] = []
    ops: List[dict] = []
    while p.peek() is not None:
        try:
            if p.at_keyword("essentials"):
                p.take()
                while p.peek() is not None and not p.at_keyword(*_DOMAIN_KEYWORDS):
                    tok = p.expect("name", "a predicate name")
                    p.expect("/", "'/'")
                    arity = p.expect("int", "an arity")
                    p.expect(".", "'.'")
                    essentials.append((tok.text, p.int_value(arity), tok))
            elif p.at_keyword("rules"):
                p.take()
                while p.peek() is not None and not p.at_keyword(*_DOMAIN_KEYWORDS):
                    try:
                        rules.append(p.clause())
                    except _Abort:
                        p.recover()
            elif p.at_keyword("operator"):
                ops.append(_parse_operator(p))
            else:
                t = p.peek()
                p.report_at(t, "E-SYNTAX", f"expected 'essentials', 'rules' or 'operator', found {t.text!r}")
                raise _Abort()
        except _Abort:
            p.recover()
    return name_tok, essentials, rules, ops


def _parse_operator(p: _Parser) -> dict:
    p.take()
    name = p.expect("name", "an operator name")
    scope: Dict[str, Var] = {}
    params: List[Tuple[Var, _Tok]] = []
    p._anon = 0
    if p.at("("):
        p.take()
        while True:
            t = p.expect("var", "a parameter variable")
            if t.text == "_":
                p.report_at(t, "E-SYNTAX", "operator parameters must be named")
            v = scope.setdefault(t.text, Var(t.text))
            params.append((v, t))
            if p.at(","):
                p.take()
                continue
            p.expect(")", "')'")
            break
    lists: Dict[str, list] = {}
    while p.at("name") and p.peek().text in ("pre", "add", "del") and p.at(":", k=1):
        key = p.take()
        p.take()
        if key.text in lists:
            p.report_at(key, "E-SYNTAX", f"duplicate '{key.text}' list")
        lists[key.text] = p.atoms(scope)
    if not p.at_keyword(*_DOMAIN_KEYWORDS) and p.peek() is not None:
        t = p.peek()
        p.report_at(t, "E-SYNTAX", f"expected 'pre:', 'add:', 'del:' or a new section, found {t.text!r}")
        raise _Abort()
    return {"name": name, "params": params, "pre": lists.get("pre", []),
            "add": lists.get("add", []), "del": lists.get("del", [])}


class _Arities:
    """Tracks the arity each predicate is used with and reports clashes."""

    def __init__(self, p: _Parser, known: Optional[Dict[str, int]] = None):
        self.p = p
        self.arity: Dict[str, int] = dict(known or {})

    def use(self, a: tuple, tok: _Tok):
        pred = a[0]
        n = len(a) - 1
        if pred in BUILTINS:
            if pred == "naf":
                if n == 0:
                    self.p.report_at(tok, "E-ARITY", "naf needs at least one goal")
                for g in a[1:]:
                    if type(g) is str:
                        g = (g,)
                    if type(g) is tuple:
                        self.use(g, tok)
                    else:
                        self.p.report_at(tok, "E-SYNTAX", "naf arguments must be atoms")
            elif BUILTIN_ARITY[pred] != n:
                self.p.report_at(tok, "E-ARITY", f"{pred} takes {BUILTIN_ARITY[pred]} arguments")
            return
        seen = self.arity.setdefault(pred, n)
        if seen != n:
            self.p.report_at(tok, "E-ARITY", f"{pred} used with arity {n}, elsewhere {seen}")


def _naf_goals(a: tuple) -> List[tuple]:
    return [(g,) if type(g) is str else g for g in a[1:] if type(g) in (str, tuple)]


def _body_preds(a: tuple) -> List[tuple]:
    """Atoms whose predicates must be known: the atom itself, or naf's goals."""
    if a[0] == "naf":
        out = []
        for g in _naf_goals(a):
            out.extend(_body_preds(g))
        return out
    if a[0] in BUILTINS:
        return []
    return [a]


def _check_singletons(p: _Parser, clause: HornClause, tok: _Tok):
    counts: Dict[str, int] = {}

    def walk(t):
        if type(t) is Var:
            counts[t.name] = counts.get(t.name, 0) + 1
        elif type(t) is tuple:
            for x in t[1:]:
                walk(x)

    for a in (clause.head, *clause.body):
        walk(a)
    for name, c in counts.items():
        if c == 1 and not name.startswith("_"):
            p.report_at(tok, "W-SINGLETON", f"variable {name} occurs only once", severity="warning")


def _validate_domain(p: _Parser, raw) -> Optional[Domain]:
    name_tok, essentials, rules, ops = raw
    ess: Dict[str, int] = {}
    ar = _Arities(p)
    for pred, arity, tok in essentials:
        if pred in BUILTINS:
            p.report_at(tok, "E-BUILTIN", f"{pred} is a built-in")
        elif arity < 0:
            p.report_at(tok, "E-ARITY", f"negative arity for {pred}")
        elif pred in ess:
            code = "E-DUP-NAME" if ess[pred] == arity else "E-ARITY"
            p.report_at(tok, code, f"essential predicate {pred} declared twice")
        else:
            ess[pred] = arity
            ar.arity[pred] = arity
    defined = set(ess)
    for clause, tok, body in rules:
        head = clause.head
        if head[0] in BUILTINS:
            p.report_at(tok, "E-BUILTIN", f"cannot define built-in {head[0]}")
        elif head[0] in ess:
            p.report_at(tok, "E-ESS-HEAD", f"rule head {term_str(head)} uses essential predicate {head[0]}")
        defined.add(head[0])
        ar.use(head, tok)
    for clause, tok, body in rules:
        for b, btok in body:
            ar.use(b, btok)
            for g in _body_preds(b):
                if g[0] not in defined:
                    p.report_at(btok, "E-UNKNOWN-PRED", f"predicate {g[0]} is neither essential nor defined by a rule")
        _check_singletons(p, clause, tok)
    schemas = []
    op_names = set()
    for op in ops:
        tok = op["name"]
        if tok.text in op_names:
            p.report_at(tok, "E-DUP-NAME", f"operator {tok.text} declared twice")
        op_names.add(tok.text)
        seen_params = set()
        for v, vtok in op["params"]:
            if v.name in seen_params:
                p.report_at(vtok, "E-DUP-NAME", f"parameter {v.name} repeated")
            seen_params.add(v.name)
        for a, atok in op["pre"]:
            ar.use(a, atok)
            for g in _body_preds(a):
                if g[0] not in defined:
                    p.report_at(atok, "E-UNKNOWN-PRED", f"predicate {g[0]} is neither essential nor defined by a rule")
        for key in ("add", "del"):
            for a, atok in op[key]:
                ar.use(a, atok)
                if a[0] not in ess:
                    p.report_at(atok, "E-NOT-ESSENTIAL", f"{key}-list atom {term_str(a)} is not essential")
        schema = OperatorSchema(
            tok.text,
            tuple(v for v, _ in op["params"]),
            tuple(a for a, _ in op["pre"]),
            tuple(a for a, _ in op["add"]),
            tuple(a for a, _ in op["del"]),
        )
        for problem in schema.scope_violations():
            p.report_at(tok, "E-VAR-SCOPE", f"operator {tok.text}: {problem}")
        schemas.append(schema)
    if not p.ok:
        return None
    return Domain(name_tok.text, ess, tuple(c for c, _, _ in rules), tuple(schemas))


def _run(text, build):
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DSLError([Diagnostic("error", "E-ENCODING", "input is not valid UTF-8",
                                       0, 0, 1, 1)]) from exc
    p = _Parser(text)
    result = None
    try:
        result = build(p)
    except _Abort:
        pass
    if result is None or not p.ok:
        if p.ok:
            p.report("E-SYNTAX", "incomplete input", len(text), len(text))
        raise DSLError(p.diags)
    return result, [d for d in p.diags if d.severity == "warning"]


def parse_domain(text: Union[str, bytes]) -> Domain:
    """Parse and validate a domain; raises :class:`DSLError` listing every problem."""
    return _run(text, lambda p: _validate_domain(p, _parse_domain_raw(p)))[0]


# -- theories --------------------------------------------------------------


def _parse_theory_raw(p: _Parser):
    name = p.header("theory")
    p.expect("name", "'from'", "from")
    conc = p.expect("name", "a concrete domain name")
    p.expect("name", "'to'", "to")
    abst = p.expect("name", "an abstract domain name")
    p.expect(".", "'.'")
    rules = []
    while p.peek() is not None:
        try:
            if p.at_keyword("rules"):
                p.take()
                continue
            rules.append(p.clause())
        except _Abort:
            p.recover()
    return name, conc, abst, rules


def check_disjoint(p: _Parser, concrete: Domain, abstract: Domain, tok: Optional[_Tok] = None):
    clash = set(concrete.defined_predicates()) & set(abstract.defined_predicates())
    clash |= {o.name for o in concrete.operators} & {o.name for o in abstract.operators}
    for sym in sorted(clash):
        p.report_at(tok, "E-SYMBOL-CLASH", f"symbol {sym} is used by both domains")


def _validate_theory(p: _Parser, raw, concrete: Domain, abstract: Domain) -> Optional[AbstractionTheory]:
    name, conc, abst, rules = raw
    if conc.text != concrete.name:
        p.report_at(conc, "W-DOMAIN-NAME", f"theory names domain {conc.text}, given {concrete.name}", "warning")
    if abst.text != abstract.name:
        p.report_at(abst, "W-DOMAIN-NAME", f"theory names domain {abst.text}, given {abstract.name}", "warning")
    check_disjoint(p, concrete, abstract, name)
    known = dict(concrete.defined_predicates())
    known.update(abstract.essentials)
    ar = _Arities(p, known)
    for clause, tok, body in rules:
        head = clause.head
        if head[0] not in abstract.essentials:
            p.report_at(tok, "E-THEORY-HEAD", f"theory rule head {term_str(head)} is not an abstract essential atom")
        ar.use(head, tok)
        for b, btok in body:
            ar.use(b, btok)
            for g in _body_preds(b):
                if g[0] not in known:
                    p.report_at(btok, "E-UNKNOWN-PRED", f"predicate {g[0]} is not in either vocabulary")
        _check_singletons(p, clause, tok)
    if not p.ok:
        return None
    return AbstractionTheory(tuple(c for c, _, _ in rules), name.text, conc.text, abst.text)


def parse_theory(text: Union[str, bytes], concrete: Domain, abstract: Domain) -> AbstractionTheory:
    return _run(text, lambda p: _validate_theory(p, _parse_theory_raw(p), concrete, abstract))[0]


# -- problems and cases ----------------------------------------------------


def _ground_state(p: _Parser, domain: Domain, atoms) -> State:
    out = []
    for a, tok in atoms:
        if a[0] not in domain.essentials:
            p.report_at(tok, "E-UNKNOWN-PRED", f"{a[0]} is not an essential predicate of {domain.name}")
        elif domain.essentials[a[0]] != len(a) - 1:
            p.report_at(tok, "E-ARITY", f"{a[0]} has arity {domain.essentials[a[0]]}")
        if not is_ground(a):
            p.report_at(tok, "E-NONGROUND", f"state atom {term_str(a)} contains variables")
        out.append(a)
    return State(out)


def _labelled_atoms(p: _Parser, label: str):
    p.expect("name", f"'{label}:'", label)
    p.expect(":", "':'")
    return p.atoms({})


def _problem_head(p: _Parser, keyword: str, domain: Domain):
    name = p.header(keyword)
    p.expect("name", "'for'", "for")
    dom = p.expect("name", "a domain name")
    p.expect(".", "'.'")
    if dom.text != domain.name:
        p.report_at(dom, "W-DOMAIN-NAME", f"file names domain {dom.text}, given {domain.name}", "warning")
    init = _ground_state(p, domain, _labelled_atoms(p, "init"))
    goal = _ground_state(p, domain, _labelled_atoms(p, "goal"))
    return Problem(init, goal, name.text)


def parse_problem(text: Union[str, bytes], domain: Domain) -> Problem:
    def build(p):
        problem = _problem_head(p, "problem", domain)
        p.end()
        return problem

    return _run(text, build)[0]


def _plan(p: _Parser, domain: Domain) -> List[Operator]:
    p.expect("name", "'plan:'", "plan")
    p.expect(":", "':'")
    steps = []
    if p.at("."):
        p.take()
        return steps
    while True:
        term, tok = p.atom({})
        try:
            schema = domain.operator(term[0])
        except KeyError:
            p.report_at(tok, "E-UNKNOWN-OP", f"{domain.name} has no operator {term[0]}")
        else:
            if len(term) - 1 != len(schema.params):
                p.report_at(tok, "E-ARITY", f"{term[0]} takes {len(schema.params)} arguments")
            elif not is_ground(term):
                p.report_at(tok, "E-NONGROUND", f"plan step {term_str(term)} contains variables")
            else:
                try:
                    steps.append(instantiate(schema, term[1:]))
                except SchemaError as exc:
                    p.report_at(tok, "E-ARITY", str(exc))
        if p.at(","):
            p.take()
            continue
        p.expect(".", "'.'")
        return steps


def _build_case(p: _Parser, domain: Domain):
    problem = _problem_head(p, "case", domain)
    plan = _plan(p, domain)
    extras = {}
    while p.peek() is not None:
        key = p.expect("name", "'source:', 'beta:' or 'alpha:'")
        if key.text not in ("source", "beta", "alpha") or key.text in extras:
            p.report_at(key, "E-SYNTAX", f"unexpected {key.text!r}")
            raise _Abort()
        p.expect(":", "':'")
        if key.text == "source":
            extras["source"] = p.expect("name", "a case name").text
            p.expect(".", "'.'")
        elif key.text == "beta":
            beta = [p.int_value(p.expect("int", "an index"))]
            while p.at(","):
                p.take()
                beta.append(p.int_value(p.expect("int", "an index")))
            p.expect(".", "'.'")
            if any(b >= c for b, c in zip(beta, beta[1:])) or beta[0] != 0:
                p.report_at(key, "E-BETA", "sequence map must start at 0 and increase strictly")
            if len(beta) != len(plan) + 1:
                p.report_at(key, "E-BETA", "sequence map needs one index per abstract state")
            extras["beta"] = tuple(beta)
        else:
            extras["alpha"] = _ground_state(p, domain, p.atoms({}))
    if extras:
        return AbstractCase(problem, tuple(plan), extras.get("source", ""), extras.get("beta", ()),
                            extras.get("alpha", frozenset()), problem.name)
    return PlanningCase(problem, tuple(plan), problem.name)


def parse_case(text: Union[str, bytes], domain: Domain) -> Union[PlanningCase, AbstractCase]:
    """Parse a concrete or abstract case.  Files carrying provenance give an :class:`AbstractCase`."""
    return _run(text, lambda p: _build_case(p, domain))[0]


def parse_abstract_case(text: Union[str, bytes], domain: Domain) -> AbstractCase:
    case = parse_case(text, domain)
    if isinstance(case, PlanningCase):
        case = AbstractCase(case.problem, case.plan, name=case.name)
    return case


# -- key:value blocks (experiment configs) ---------------------------------


def parse_config(text: Union[str, bytes]) -> Tuple[str, Dict[str, list]]:
    """Parse ``experiment NAME.`` followed by ``key: value, value.`` lines."""

    def build(p):
        name = p.header("experiment")
        p.expect(".", "'.'")
        values: Dict[str, list] = {}
        while p.peek() is not None:
            key = p.expect("name", "a key")
            p.expect(":", "':'")
            items = []
            while not p.at("."):
                t = p.peek()
                if t is None or t.kind not in ("name", "int", "string", "var"):
                    p.report_at(t, "E-SYNTAX", "expected a value")
                    raise _Abort()
                p.take()
                items.append(p.int_value(t) if t.kind == "int" else t.text.strip('"'))
                if p.at(","):
                    p.take()
            p.take()
            if key.text in values:
                p.report_at(key, "E-DUP-NAME", f"key {key.text} given twice")
            values[key.text] = items
        return name.text, values

    return _run(text, build)[0]


# -- diagnostics-only entry point ------------------------------------------


def check(text: Union[str, bytes], kind: str, **context) -> List[Diagnostic]:
    """All diagnostics (errors and warnings) for ``text`` parsed as ``kind``."""
    try:
        _, warnings = _run(text, lambda p: _checked(p, kind, context))
    except DSLError as exc:
        return exc.diagnostics
    return warnings


def _checked(p, kind, context):
    if kind == "domain":
        return _validate_domain(p, _parse_domain_raw(p))
    if kind == "theory":
        return _validate_theory(p, _parse_theory_raw(p), context["concrete"], context["abstract"])
    if kind == "problem":
        problem = _problem_head(p, "problem", context["domain"])
        p.end()
        return problem
    return _build_case(p, context["domain"])


def sniff_kind(text: str) -> Optional[str]:
    """Kind of a source file from its header keyword."""
    m = re.match(r"(?:\s|%[^\n]*\n)*([a-z]+)", text)
    if not m:
        return None
    return {"domain": "domain", "theory": "theory", "problem": "problem", "case": "case",
            "experiment": "config"}.get(m.group(1))


KIND_BY_SUFFIX = {".pdom": "domain", ".pabs": "theory", ".pprob": "problem", ".pcase": "case"}


# -- formatting ------------------------------------------------------------


def _atoms_str(atoms: Iterable[tuple]) -> str:
    return ", ".join(term_str(a) for a in atoms)


def _state_str(state) -> str:
    return _atoms_str(sorted(state, key=atom_key))


def format_domain(domain: Domain) -> str:
    lines = [f"domain {domain.name}.", ""]
    if domain.essentials:
        lines.append("essentials")
        lines += [f"  {p}/{n}." for p, n in domain.essentials.items()]
        lines.append("")
    if domain.rules:
        lines.append("rules")
        lines += [f"  {c}" for c in domain.rules]
        lines.append("")
    for op in domain.operators:
        head = f"operator {op.name}"
        if op.params:
            head += "(" + ", ".join(v.name for v in op.params) + ")"
        lines.append(head)
        for key, atoms in (("pre", op.pre), ("add", op.add), ("del", op.delete)):
            if atoms:
                lines.append(f"  {key}: {_atoms_str(atoms)}.")
        lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"


def format_theory(theory: AbstractionTheory) -> str:
    lines = [f"theory {theory.name or 'theory'} from {theory.concrete or 'concrete'} to {theory.abstract or 'abstract'}.",
             "", "rules"]
    lines += [f"  {c}" for c in theory.rules]
    return "\n".join(lines) + "\n"


def format_problem(problem: Problem, domain_name: str) -> str:
    return (f"problem {problem.name or 'problem'} for {domain_name}.\n"
            f"init: {_state_str(problem.initial)}.\n"
            f"goal: {_state_str(problem.goal)}.\n")


def format_case(case: Union[PlanningCase, AbstractCase], domain_name: str) -> str:
    name = case.name or case.problem.name or "case"
    lines = [f"case {name} for {domain_name}.",
             f"init: {_state_str(case.problem.initial)}.",
             f"goal: {_state_str(case.problem.goal)}.",
             f"plan: {', '.join(str(op) for op in case.plan)}."]
    if isinstance(case, AbstractCase):
        if case.source:
            lines.append(f"source: {case.source}.")
        if case.beta:
            lines.append(f"beta: {', '.join(str(b) for b in case.beta)}.")
        lines.append(f"alpha: {_state_str(case.alpha)}.")
    return "\n".join(lines) + "\n"


def format_model(model, domain_name: str = "") -> str:
    """Canonical text of any model object."""
    if isinstance(model, Domain):
        return format_domain(model)
    if isinstance(model, AbstractionTheory):
        return format_theory(model)
    if isinstance(model, Problem):
        return format_problem(model, domain_name)
    if isinstance(model, (PlanningCase, AbstractCase)):
        return format_case(model, domain_name)
    raise TypeError(f"cannot format {type(model).__name__}")


# -- case-base index -------------------------------------------------------


def format_index(entries: Sequence[Tuple[str, int]]) -> str:
    return "".join(f"{name} {length}\n" for name, length in entries)


def parse_index(text: str) -> List[Tuple[str, int]]:
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("%", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or not parts[1].isdigit():
            raise DSLError([Diagnostic("error", "E-INDEX", "expected '<file> <plan length>'",
                                       0, 0, lineno, 1)])
        entries.append((parts[0], int(parts[1])))
    return entries


def read_text(path: Union[str, Path]) -> str:
    return Path(path).read_text(encoding="utf-8")
