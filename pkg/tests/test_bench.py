import json
import math
from pathlib import Path

import pytest

from abscase import cli
from abscase.bench import (
    ExperimentConfig,
    TrialRecord,
    emit_report,
    format_tsv,
    load_config,
    quality_stats,
    records_from_json,
    run_experiment,
    sign_test,
    summarize,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_sign_test_all_wins():
    r = sign_test([(1, 2, False, False)] * 10)
    assert (r.wins, r.losses) == (10, 0)
    assert math.isclose(r.p_value, 2 ** -10)


def test_sign_test_even():
    r = sign_test([(1, 2, False, False)] * 5 + [(3, 2, False, False)] * 5)
    assert math.isclose(r.p_value, 638 / 1024)
    assert round(r.p_value, 3) == 0.623


def test_sign_test_all_censored():
    r = sign_test([(9, 9, True, True)] * 4)
    assert r.wins == 0 and r.censored == 4 and r.p_value == 1.0


def test_sign_test_counting_rules():
    r = sign_test([(5, 9, False, True), (5, 5, False, False), (9, 5, True, False), (4, 9, False, False)])
    assert (r.wins, r.losses, r.ties, r.censored) == (2, 1, 1, 0)
    assert r.pairs == 4 and 0 <= r.p_value <= 1


def test_sign_test_needs_pairs():
    with pytest.raises(ValueError):
        sign_test([])


def test_quality_stats():
    assert quality_stats([(5, 5)] * 3) == (0, 100, 0)
    assert quality_stats([(4, 5), (5, 5), (5, 5), (5, 5)]) == (25, 75, 0)
    with pytest.raises(ValueError):
        quality_stats([])


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(modes=("pure", "magic"))
    with pytest.raises(ValueError):
        ExperimentConfig(train_size=20, train_pool=10)


def test_load_config():
    config, base = load_config(CONFIGS / "lathe.pcfg")
    assert config.modes == ("pure", "hierarchical", "cases", "cases_ablated")
    assert config.seeds == (1, 2, 3) and base == CONFIGS


@pytest.fixture(scope="module")
def cube_result():
    config, _ = load_config(CONFIGS / "cube.pcfg")
    return run_experiment(config)


def test_cube_micro_experiment(cube_result):
    pure = {r.problem: r for r in cube_result.records if r.mode == "pure"}
    cases = {r.problem: r for r in cube_result.records if r.mode == "cases"}
    assert set(cases) == {"y", "z"}
    for name, r in cases.items():
        assert r.solved and r.expansions < pure[name].expansions


def test_report_is_deterministic(cube_result):
    config, _ = load_config(CONFIGS / "cube.pcfg")
    assert format_tsv(run_experiment(config)) == format_tsv(cube_result)


def test_report_golden(cube_result):
    golden = (Path(__file__).parent / "golden" / "cube_micro.tsv").read_text()
    assert format_tsv(cube_result) == golden


def test_json_roundtrip(cube_result, tmp_path):
    path = emit_report(cube_result, tmp_path / "r.json", "json")
    assert records_from_json(path.read_text()) == cube_result.records
    doc = json.loads(path.read_text())
    assert len(doc["summary"]) == len(summarize(cube_result.records))


def test_aggregates_match_rows(cube_result, tmp_path):
    path = emit_report(cube_result, tmp_path / "r.tsv")
    rows, summary = path.read_text().split("\n\n")[:2]
    lines = [line.split("\t") for line in rows.splitlines()]
    head, body = lines[0], lines[1:]
    by_mode = {}
    for row in body:
        rec = dict(zip(head, row))
        by_mode.setdefault(rec["mode"], []).append(rec)
    slines = [line.split("\t") for line in summary.splitlines()]
    for row in slines[1:]:
        s = dict(zip(slines[0], row))
        recs = by_mode[s["mode"]]
        assert int(s["trials"]) == len(recs)
        assert int(s["solved"]) == sum(r["solved"] == "1" for r in recs)
        mean = sum(int(r["expansions"]) for r in recs) / len(recs)
        assert math.isclose(float(s["mean_expansions"]), mean, rel_tol=1e-5)


def test_counting_experiment_depths():
    from abscase.planner import CaseBase, Levels, solve_with_cases
    from abscase.toy import counting_fixture

    bundle = counting_fixture(4)
    levels = Levels(bundle.concrete, bundle.abstract, bundle.theory)
    problem = bundle.cases["count_0_8"].problem
    sol = solve_with_cases(problem, CaseBase(bundle.abstract_cases.values()), levels)
    assert max(seg[1] for seg in sol.segments) == 4


def test_audit_rejects_nothing_on_toys(cube_result):
    assert all(r.length >= 0 for r in cube_result.records if r.solved)


# -- command line ------------------------------------------------------------

FIX = Path(__file__).resolve().parent.parent / "src" / "abscase" / "fixtures"


def test_cli_validate_ok(capsys):
    assert cli.main(["validate", str(FIX / "cube.pdom"), str(FIX / "cube_y.pprob")]) == 0


def test_cli_validate_errors(tmp_path, capsys):
    bad = tmp_path / "bad.pdom"
    bad.write_text("domain d. essentials value/1. rules value(X) :- foo(X).")
    assert cli.main(["validate", str(bad)]) == 2
    assert "E-ESS-HEAD" in capsys.readouterr().out


def test_cli_learn_and_solve(tmp_path, capsys):
    assert cli.main(["learn", str(FIX / "cube_x.pcase"), "--out", str(tmp_path / "cb")]) == 0
    assert (tmp_path / "cb" / "casebase.idx").exists()
    code = cli.main(["solve", str(FIX / "cube_y.pprob"), "--mode", "cases", "--casebase", str(tmp_path / "cb")])
    assert code == 0
    assert "plan:" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path):
    assert cli.main(["solve", str(FIX / "counting_0_8.pprob"), "--max-expansions", "5"]) == 3
    assert cli.main(["solve", str(tmp_path / "missing.pprob"), "--builtin", "cube"]) == 2
    assert cli.main(["solve", str(FIX / "cube_y.pprob"), "--mode", "cases"]) == 2
    unsolvable = tmp_path / "u.pprob"
    unsolvable.write_text("problem u for counting. init: value(5). goal: value(2).")
    assert cli.main(["solve", str(unsolvable), "--deep-max", "3"]) == 1


def test_cli_bench(tmp_path, capsys):
    out = tmp_path / "cube.tsv"
    assert cli.main(["bench", "--config", str(CONFIGS / "cube.pcfg"), "--out", str(out)]) == 0
    assert out.read_text().startswith("problem\tmode")


def test_cli_gen(tmp_path):
    assert cli.main(["gen", "--domain", "lathe", "--count", "1", "--seed", "2", "--out", str(tmp_path)]) == 0
    files = list(tmp_path.glob("*.pcase"))
    assert len(files) == 1
    assert cli.main(["validate", str(files[0])]) == 0
