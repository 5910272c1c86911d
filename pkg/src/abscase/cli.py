"""Command-line entry point: ``abscase validate|learn|solve|gen|bench``.

Exit codes: 0 success, 1 unsolved, 2 input error, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import bench, lathe, toy
from .domain import AbstractCase, Domain, PlanningCase, Problem
from .dsl import (KIND_BY_SUFFIX, DSLError, check, format_case, parse_case, parse_config, parse_domain, parse_problem,
                  parse_theory, read_text, sniff_kind)
from .logic import LogicError
from .pabs import PabsError, PathLimitExceeded, pabs
from .planner import (CaseBase, Levels, SearchBudget, Unsolved, load_casebase, save_casebase, solve_hierarchical,
                      solve_pure, solve_with_cases)

OK, UNSOLVED, INPUT_ERROR, BUDGET = 0, 1, 2, 3


class InputError(Exception):
    pass


def _builtin(name: str) -> Optional[Levels]:
    if name in ("lathe", "lathe_abs"):
        return Levels(*lathe.build_domains())
    if name in ("cube", "cube_abs", "counting", "counting_abs"):
        b = toy.cube_fixture() if name.startswith("cube") else toy.counting_fixture()
        return Levels(b.concrete, b.abstract, b.theory)
    return None


def _header_names(text: str) -> List[str]:
    m = re.match(r"(?:\s|%[^\n]*\n)*[a-z]+\s+[a-z][A-Za-z0-9_]*\s+(?:for|from)\s+([a-z][A-Za-z0-9_]*)"
                 r"(?:\s+to\s+([a-z][A-Za-z0-9_]*))?", text)
    return [g for g in m.groups() if g] if m else []


def _levels(args, first_file: Optional[str] = None) -> Levels:
    """Domains from --domain/--abstract/--theory files, a --builtin name, or the first input's header."""
    if args.domain:
        if not (args.abstract and args.theory):
            raise InputError("--domain needs --abstract and --theory as well")
        concrete = parse_domain(read_text(args.domain))
        abstract = parse_domain(read_text(args.abstract))
        return Levels(concrete, abstract, parse_theory(read_text(args.theory), concrete, abstract))
    name = args.builtin
    if not name and first_file:
        names = _header_names(read_text(first_file))
        name = names[0] if names else None
    levels = _builtin(name) if name else None
    if levels is None:
        raise InputError("cannot tell which domains to use; pass --builtin or --domain/--abstract/--theory")
    return levels


def _budget(args) -> SearchBudget:
    return SearchBudget(args.max_expansions, args.deep_max)


# -- commands ---------------------------------------------------------------


def cmd_validate(args) -> int:
    texts = {f: read_text(f) for f in args.files}
    kinds = {f: KIND_BY_SUFFIX.get(Path(f).suffix) or sniff_kind(t) for f, t in texts.items()}
    domains: Dict[str, Domain] = {}
    failed = False

    def domain_named(name: str) -> Optional[Domain]:
        if name in domains:
            return domains[name]
        lv = _builtin(name)
        if lv is None:
            return None
        return lv.concrete if lv.concrete.name == name else lv.abstract

    def report(f, diags):
        nonlocal failed
        for d in diags:
            print(f"{f}:{d}")
            failed |= d.severity == "error"

    for f in args.files:
        if kinds[f] == "domain":
            diags = check(texts[f], "domain")
            report(f, diags)
            if not any(d.severity == "error" for d in diags):
                dom = parse_domain(texts[f])
                domains[dom.name] = dom
    for f in args.files:
        kind = kinds[f]
        if kind == "domain":
            continue
        if kind == "config":
            try:
                parse_config(texts[f])
            except DSLError as exc:
                report(f, exc.diagnostics)
            continue
        if kind is None:
            print(f"{f}: error: unknown file kind")
            failed = True
            continue
        needed = [domain_named(n) for n in _header_names(texts[f])]
        if not needed or any(d is None for d in needed):
            print(f"{f}: error: referenced domain not found among the inputs or built-ins")
            failed = True
            continue
        if kind == "theory":
            if len(needed) != 2:
                print(f"{f}: error: theory header must name two domains")
                failed = True
                continue
            report(f, check(texts[f], "theory", concrete=needed[0], abstract=needed[1]))
        else:
            report(f, check(texts[f], kind, domain=needed[0]))
    if not failed:
        print(f"{len(args.files)} file(s) ok")
    return INPUT_ERROR if failed else OK


def cmd_learn(args) -> int:
    levels = _levels(args, args.cases[0])
    cb = CaseBase(domain_name=levels.abstract.name)
    for f in args.cases:
        case = parse_case(read_text(f), levels.concrete)
        if isinstance(case, AbstractCase):
            raise InputError(f"{f} is an abstract case")
        try:
            learned = pabs(case, levels.concrete, levels.abstract, levels.theory, path_cap=args.path_cap)
        except PathLimitExceeded as exc:
            print(f"{f}: {exc}", file=sys.stderr)
            return BUDGET
        added = cb.extend(learned)
        print(f"{f}: {len(learned)} abstract case(s), {added} new")
    index = save_casebase(cb, args.out)
    print(f"{len(cb)} case(s) written to {index}")
    return OK


def _read_problem(path: str, levels: Levels) -> Problem:
    text = read_text(path)
    if (KIND_BY_SUFFIX.get(Path(path).suffix) or sniff_kind(text)) == "problem":
        return parse_problem(text, levels.concrete)
    return parse_case(text, levels.concrete).problem


def cmd_solve(args) -> int:
    levels = _levels(args, args.problem)
    problem = _read_problem(args.problem, levels)
    budget = _budget(args)
    try:
        if args.mode == "pure":
            sol = solve_pure(problem, levels, budget)
        elif args.mode == "hier":
            sol = solve_hierarchical(problem, levels, budget)
        else:
            if not args.casebase:
                raise InputError("--mode cases needs --casebase")
            sol = solve_with_cases(problem, load_casebase(args.casebase, levels.abstract), levels, budget)
    except Unsolved as exc:
        print(f"unsolved ({exc.reason}) after {exc.expansions} expansions")
        return BUDGET if exc.reason == "budget" else UNSOLVED
    name = problem.name or Path(args.problem).stem
    print(format_case(PlanningCase(problem, sol.plan, name), levels.concrete.name), end="")
    extra = " via fallback" if sol.fallback else ""
    print(f"% {sol.length} steps, {sol.expansions} expansions, mode {sol.mode}{extra}")
    return OK


def cmd_gen(args) -> int:
    if args.domain != "lathe":
        raise InputError("only the lathe domain has a generator")
    concrete = lathe.build_domains()[0]
    params = lathe.GenerationParams(seed=args.seed, count=args.count)
    try:
        cases = lathe.generate_problems(params, concrete)
    except lathe.GenerationExhausted as exc:
        print(str(exc), file=sys.stderr)
        return BUDGET
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for case in cases:
        (out / f"{case.name}.pcase").write_text(format_case(case, concrete.name), encoding="utf-8")
    print(f"{len(cases)} case(s) written to {out}")
    return OK


def cmd_bench(args) -> int:
    config, base = bench.load_config(args.config)
    progress = None
    if args.verbose:
        def progress(r):
            print(f"{r.problem}\t{r.mode}\t{r.training_set}\t{int(r.solved)}\t{r.expansions}", file=sys.stderr)
    result = bench.run_experiment(config, progress)
    target = args.out or config.report or f"{config.name}.{config.format}"
    path = bench.emit_report(result, base / target if not args.out else target, config.format)
    for s in bench.summarize(result.records):
        print(f"{s.mode:14s} {s.training_set:7s} solved {s.solved}/{s.trials}"
              f"  median reduction {s.reduction:.3g}  sign p {s.sign_p:.3g}")
    print(f"report written to {path}")
    return OK


# -- argument parsing -------------------------------------------------------


def _domain_options(p):
    p.add_argument("--builtin", choices=["lathe", "cube", "counting"], help="use a bundled domain set")
    p.add_argument("--domain", help="concrete domain file")
    p.add_argument("--abstract", help="abstract domain file")
    p.add_argument("--theory", help="abstraction theory file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abscase", description="Learn abstract cases and plan with them.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check source files and print diagnostics")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("learn", help="learn abstract cases from concrete cases")
    p.add_argument("cases", nargs="+")
    p.add_argument("--out", required=True, help="case base directory")
    p.add_argument("--path-cap", type=int, default=10_000)
    _domain_options(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("solve", help="solve a problem")
    p.add_argument("problem")
    p.add_argument("--mode", choices=["pure", "hier", "cases"], default="pure")
    p.add_argument("--casebase", help="case base directory or index file")
    p.add_argument("--max-expansions", type=int, default=100_000)
    p.add_argument("--deep-max", type=int, default=30)
    _domain_options(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("gen", help="generate random solved problems")
    p.add_argument("--domain", default="lathe")
    p.add_argument("--count", type=int, default=25)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="run an experiment described by a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="report path (default: from the config)")
    p.add_argument("-v", "--verbose", action="store_true", help="print each trial to stderr")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DSLError as exc:
        print(str(exc), file=sys.stderr)
    except (InputError, OSError, ValueError, LogicError, PabsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
