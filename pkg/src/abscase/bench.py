"""Experiment harness: learn from training cases, solve test problems in several modes, compare."""

from __future__ import annotations

import json
import math
import random
import statistics
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .domain import AbstractCase, AbstractionTheory, Domain, PlanningCase, execute_plan
from .dsl import parse_config, read_text
from .lathe import GenerationParams, build_ablated_abstract_domain, build_domains, generate_problems
from .pabs import PabsError, pabs
from .planner import CaseBase, Levels, SearchBudget, Unsolved, solve_hierarchical, solve_pure, solve_with_cases
from .toy import counting_fixture, cube_fixture

MODES = ("pure", "hierarchical", "cases", "cases_ablated")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    domain: str = "lathe"
    modes: Tuple[str, ...] = ("pure", "hierarchical", "cases")
    seeds: Tuple[int, ...] = (1, 2, 3)
    train_size: int = 5
    train_pool: int = 10
    test_count: int = 20
    pool_seed: int = 7
    max_expansions: int = 5000
    deep_max: int = 30
    distractors: int = 0
    report: str = ""
    format: str = "tsv"

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "seeds", tuple(self.seeds))
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ValueError(f"unknown modes: {', '.join(bad)}")
        if self.domain not in ("lathe", "cube", "counting"):
            raise ValueError(f"unknown domain {self.domain}")
        if self.format not in ("tsv", "json"):
            raise ValueError(f"unknown report format {self.format}")
        if self.train_size > self.train_pool:
            raise ValueError("training sets cannot be larger than the training pool")
        if min(self.max_expansions, self.deep_max, self.test_count, self.train_size) <= 0:
            raise ValueError("sizes and budgets must be positive")

    @property
    def budget(self) -> SearchBudget:
        return SearchBudget(self.max_expansions, self.deep_max)


_LIST_KEYS = {"modes", "seeds"}


def load_config(path: Union[str, Path]) -> Tuple[ExperimentConfig, Path]:
    """Read a config file; returns the config and the directory relative paths resolve against."""
    path = Path(path)
    name, values = parse_config(read_text(path))
    known = {f.name: f for f in fields(ExperimentConfig)}
    kwargs: Dict[str, object] = {"name": name}
    for key, items in values.items():
        if key not in known or key == "name":
            raise ValueError(f"unknown config key {key}")
        if key in _LIST_KEYS:
            kwargs[key] = tuple(items)
        elif len(items) != 1:
            raise ValueError(f"config key {key} takes one value")
        else:
            kwargs[key] = items[0]
    for key, value in kwargs.items():
        want = known[key].type
        if want == "int" and not isinstance(value, int):
            raise ValueError(f"config key {key} needs an integer")
    return ExperimentConfig(**kwargs), path.parent


@dataclass
class TrialRecord:
    problem: str
    mode: str
    training_set: str
    solved: bool
    expansions: int
    length: int
    reference_length: int
    case_used: str = ""
    fallback: bool = False
    failed_refinements: int = 0
    wall_time: float = 0.0


@dataclass(frozen=True)
class SignTestResult:
    wins: int
    losses: int
    ties: int
    censored: int
    p_value: float

    @property
    def pairs(self) -> int:
        return self.wins + self.losses + self.ties + self.censored


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: List[TrialRecord]
    learned: Dict[str, int] = field(default_factory=dict)


# -- statistics -------------------------------------------------------------


def sign_test(pairs: Sequence[Tuple[float, float, bool, bool]]) -> SignTestResult:
    """One-sided sign test that A beats B, counting every doubtful pair against A.

    Each pair is ``(cost_a, cost_b, censored_a, censored_b)``.  A wins when
    it solved and B did not, or both solved and A cost strictly less.
    Ties and pairs where neither solved count as losses.
    """
    if not pairs:
        raise ValueError("sign test needs at least one pair")
    wins = losses = ties = censored = 0
    for a, b, ca, cb in pairs:
        if ca and cb:
            censored += 1
            losses += 1
        elif cb:
            wins += 1
        elif ca:
            losses += 1
        elif a < b:
            wins += 1
        elif a == b:
            ties += 1
            losses += 1
        else:
            losses += 1
    n = wins + losses
    p = sum(math.comb(n, k) for k in range(wins, n + 1)) / 2 ** n
    return SignTestResult(wins, losses - ties - censored, ties, censored, min(1.0, p))


def quality_stats(pairs: Sequence[Tuple[int, int]]) -> Tuple[float, float, float]:
    """Percentages of found plans shorter than, equal to and longer than the reference."""
    if not pairs:
        raise ValueError("no solved trials to compare")
    shorter = sum(1 for f, r in pairs if f < r)
    equal = sum(1 for f, r in pairs if f == r)
    longer = len(pairs) - shorter - equal
    n = len(pairs)
    return 100.0 * shorter / n, 100.0 * equal / n, 100.0 * longer / n


# -- running ----------------------------------------------------------------


@dataclass
class _Setup:
    levels: Levels
    ablated: Optional[Levels]
    tests: List[PlanningCase]
    training: Dict[str, List[PlanningCase]]


def _setup(config: ExperimentConfig) -> _Setup:
    if config.domain == "lathe":
        concrete, abstract, theory = build_domains()
        ab_domain, ab_theory = build_ablated_abstract_domain()
        pool = generate_problems(GenerationParams(seed=config.pool_seed, count=config.test_count + config.train_pool),
                                 concrete)
        tests = pool[:config.test_count]
        train_pool = pool[config.test_count:]
        training = {}
        for seed in config.seeds:
            rng = random.Random(seed)
            training[f"s{seed}"] = sorted(rng.sample(train_pool, config.train_size), key=lambda c: c.name)
        return _Setup(Levels(concrete, abstract, theory), Levels(concrete, ab_domain, ab_theory), tests, training)
    bundle = cube_fixture(config.distractors) if config.domain == "cube" else counting_fixture(config.distractors)
    levels = Levels(bundle.concrete, bundle.abstract, bundle.theory)
    training = {"golden": list(bundle.cases.values())}
    tests = []
    for name, problem in bundle.problems.items():
        tests.append(PlanningCase(problem, (), name))
    return _Setup(levels, None, tests, training)


def learn(cases: Iterable[PlanningCase], levels: Levels, path_cap: int = 10_000) -> CaseBase:
    """A case base of every abstract case of every training case; unlearnable cases are skipped."""
    cb = CaseBase(domain_name=levels.abstract.name)
    for case in cases:
        try:
            cb.extend(pabs(case, levels.concrete, levels.abstract, levels.theory, path_cap=path_cap))
        except PabsError:
            continue
    return cb


def _plan_text(case: Optional[AbstractCase]) -> str:
    if case is None:
        return ""
    return " ".join(str(op).replace(" ", "") for op in case.plan)


def _trial(test: PlanningCase, mode: str, training: str, solve, levels: Levels) -> TrialRecord:
    t0 = time.perf_counter()
    reference = len(test.plan) if test.plan else -1
    try:
        sol = solve()
    except Unsolved as exc:
        return TrialRecord(test.name, mode, training, False, exc.expansions, -1, reference,
                           failed_refinements=exc.failed_refinements, wall_time=time.perf_counter() - t0)
    # audit: a solved record always carries a valid plan
    execute_plan(PlanningCase(test.problem, sol.plan), levels.concrete)
    return TrialRecord(test.name, mode, training, True, sol.expansions, len(sol.plan), reference,
                       _plan_text(sol.case), sol.fallback, sol.failed_refinements, time.perf_counter() - t0)


def run_experiment(config: ExperimentConfig, progress=None) -> ExperimentResult:
    setup = _setup(config)
    budget = config.budget
    records: List[TrialRecord] = []
    learned: Dict[str, int] = {}
    levels = setup.levels

    def note(rec):
        records.append(rec)
        if progress:
            progress(rec)

    for test in setup.tests:
        if "pure" in config.modes:
            note(_trial(test, "pure", "-", lambda: solve_pure(test.problem, levels, budget), levels))
        if "hierarchical" in config.modes:
            note(_trial(test, "hierarchical", "-", lambda: solve_hierarchical(test.problem, levels, budget), levels))
    for mode, lv in (("cases", levels), ("cases_ablated", setup.ablated)):
        if mode not in config.modes:
            continue
        if lv is None:
            raise ValueError(f"mode {mode} is not available for domain {config.domain}")
        for tname, train in setup.training.items():
            cb = learn(train, lv)
            learned[f"{mode}/{tname}"] = len(cb)
            for test in setup.tests:
                note(_trial(test, mode, tname, lambda: solve_with_cases(test.problem, cb, lv, budget), lv))
    records.sort(key=lambda r: (r.problem, MODES.index(r.mode), r.training_set))
    return ExperimentResult(config, records, learned)


# -- summaries --------------------------------------------------------------


@dataclass
class GroupSummary:
    mode: str
    training_set: str
    trials: int
    solved: int
    mean_expansions: float
    median_expansions_common: float
    median_expansions_pure_common: float
    reduction: float
    sign_wins: int
    sign_losses: int
    sign_p: float
    shorter: float
    equal: float
    longer: float


def summarize(records: Sequence[TrialRecord]) -> List[GroupSummary]:
    """One line per (mode, training set) plus an ``all`` line per case mode.

    Expansion medians are over problems both this group and pure search
    solved; the sign test compares the group against pure search.
    """
    pure = {r.problem: r for r in records if r.mode == "pure"}
    groups: Dict[Tuple[str, str], List[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.mode, r.training_set), []).append(r)
        if r.mode.startswith("cases"):
            groups.setdefault((r.mode, "all"), []).append(r)
    out = []
    for (mode, tset), rs in sorted(groups.items(), key=lambda kv: (MODES.index(kv[0][0]), kv[0][1])):
        solved = [r for r in rs if r.solved]
        mean_exp = statistics.fmean(r.expansions for r in rs)
        common = [r for r in solved if r.problem in pure and pure[r.problem].solved]
        med = statistics.median(r.expansions for r in common) if common else float("nan")
        med_pure = statistics.median(pure[r.problem].expansions for r in common) if common else float("nan")
        reduction = med_pure / med if common and med > 0 else float("nan")
        if mode != "pure" and pure:
            pairs = [(r.expansions, pure[r.problem].expansions, not r.solved, not pure[r.problem].solved)
                     for r in rs if r.problem in pure]
            st = sign_test(pairs) if pairs else SignTestResult(0, 0, 0, 0, 1.0)
        else:
            st = SignTestResult(0, 0, 0, 0, float("nan"))
        q = [(r.length, r.reference_length) for r in solved if r.reference_length >= 0]
        sh, eq, lo = quality_stats(q) if q else (float("nan"),) * 3
        out.append(GroupSummary(mode, tset, len(rs), len(solved), mean_exp, med, med_pure, reduction,
                                st.wins, st.losses + st.ties + st.censored, st.p_value, sh, eq, lo))
    return out


# -- reports ----------------------------------------------------------------

_RECORD_COLUMNS = [f.name for f in fields(TrialRecord) if f.name != "wall_time"]
_SUMMARY_COLUMNS = [f.name for f in fields(GroupSummary)]


def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6g}"
    return str(v)


def format_tsv(result: ExperimentResult) -> str:
    """Trial rows, then a summary block.  Wall time is left out so reruns are byte-identical."""
    lines = ["\t".join(_RECORD_COLUMNS)]
    for r in result.records:
        d = asdict(r)
        lines.append("\t".join(_cell(d[c]) for c in _RECORD_COLUMNS))
    lines.append("")
    lines.append("\t".join(_SUMMARY_COLUMNS))
    for s in summarize(result.records):
        d = asdict(s)
        lines.append("\t".join(_cell(d[c]) for c in _SUMMARY_COLUMNS))
    lines.append("")
    lines.append("learned\tcases")
    for k in sorted(result.learned):
        lines.append(f"{k}\t{result.learned[k]}")
    return "\n".join(lines) + "\n"


def _json_safe(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def format_json(result: ExperimentResult) -> str:
    doc = {
        "config": asdict(result.config),
        "records": [asdict(r) for r in result.records],
        "summary": [{k: _json_safe(v) for k, v in asdict(s).items()} for s in summarize(result.records)],
        "learned": result.learned,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def records_from_json(text: str) -> List[TrialRecord]:
    return [TrialRecord(**r) for r in json.loads(text)["records"]]


def emit_report(result: ExperimentResult, path: Union[str, Path], fmt: str = "tsv") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = format_tsv(result) if fmt == "tsv" else format_json(result)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
