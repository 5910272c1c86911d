"""The counting and three-bit cube fixtures, loaded from the bundled source files."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Dict

from .domain import AbstractCase, AbstractionTheory, Domain, OperatorSchema, PlanningCase, Problem
from .dsl import parse_abstract_case, parse_case, parse_domain, parse_problem, parse_theory


@dataclass(frozen=True)
class FixtureBundle:
    concrete: Domain
    abstract: Domain
    theory: AbstractionTheory
    problems: Dict[str, Problem] = field(default_factory=dict)
    cases: Dict[str, PlanningCase] = field(default_factory=dict)
    abstract_cases: Dict[str, AbstractCase] = field(default_factory=dict)


def fixture_text(name: str) -> str:
    return resources.files(__package__).joinpath("fixtures").joinpath(name).read_text(encoding="utf-8")


def _bundle(prefix: str, problems, cases, abstract_cases) -> FixtureBundle:
    concrete = parse_domain(fixture_text(f"{prefix}.pdom"))
    abstract = parse_domain(fixture_text(f"{prefix}_abs.pdom"))
    theory = parse_theory(fixture_text(f"{prefix}.pabs"), concrete, abstract)
    return FixtureBundle(
        concrete,
        abstract,
        theory,
        {name: parse_problem(fixture_text(f), concrete) for name, f in problems.items()},
        {name: parse_case(fixture_text(f), concrete) for name, f in cases.items()},
        {name: parse_abstract_case(fixture_text(f), abstract) for name, f in abstract_cases.items()},
    )


def counting_fixture(distractors: int = 0) -> FixtureBundle:
    """Counter 0 -> 8 with qualitative levels; optionally ``distractors`` inert operators."""
    bundle = _bundle("counting", {"count_0_8": "counting_0_8.pprob"}, {"count_0_8": "counting_0_8.pcase"},
                     {"count_levels": "counting_ca.pcase"})
    if distractors:
        bundle = FixtureBundle(with_distractors(bundle.concrete, distractors), bundle.abstract, bundle.theory,
                               bundle.problems, bundle.cases, bundle.abstract_cases)
    return bundle


def cube_fixture(distractors: int = 0) -> FixtureBundle:
    bundle = _bundle("cube", {"y": "cube_y.pprob", "z": "cube_z.pprob"}, {"x": "cube_x.pcase"},
                     {"ca1": "ca1.pcase", "ca2": "ca2.pcase"})
    if distractors:
        bundle = FixtureBundle(with_distractors(bundle.concrete, distractors), bundle.abstract, bundle.theory,
                               bundle.problems, bundle.cases, bundle.abstract_cases)
    return bundle


def with_distractors(domain: Domain, k: int) -> Domain:
    """Add ``k`` operators that each raise an unrelated flag once.

    They never help reach a goal over the original predicates but widen
    the search tree, the way irrelevant operators do in larger domains.
    """
    if "flag" in domain.essentials:
        raise ValueError(f"domain {domain.name} already uses the flag predicate")
    essentials = dict(domain.essentials)
    essentials["flag"] = 1
    ops = list(domain.operators)
    for i in range(1, k + 1):
        ops.append(OperatorSchema(f"distract_{i}", (), (("naf", ("flag", i)),), (("flag", i),), ()))
    return Domain(domain.name, essentials, domain.rules, tuple(ops))
