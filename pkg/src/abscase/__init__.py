"""Learning abstract planning cases from concrete plans and reusing them to speed up search."""

from .domain import AbstractCase, AbstractionTheory, Domain, Operator, OperatorSchema, PlanningCase, Problem, State
from .dsl import DSLError, parse_case, parse_domain, parse_problem, parse_theory
from .pabs import brute_force_abstractions, pabs, verify_abstraction
from .planner import CaseBase, Levels, SearchBudget, Solution, Unsolved, solve_hierarchical, solve_pure, solve_with_cases

__version__ = "0.1.0"

__all__ = [
    "AbstractCase", "AbstractionTheory", "Domain", "Operator", "OperatorSchema", "PlanningCase", "Problem", "State",
    "DSLError", "parse_case", "parse_domain", "parse_problem", "parse_theory",
    "brute_force_abstractions", "pabs", "verify_abstraction",
    "CaseBase", "Levels", "SearchBudget", "Solution", "Unsolved", "solve_hierarchical", "solve_pure",
    "solve_with_cases",
]
