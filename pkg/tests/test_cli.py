import json

import pytest
from hypothesis import given, strategies as st

from superform_lab.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from superform_lab.report import Report, make_check, payload_bytes, render
from superform_lab.scenario import Scenario, ScenarioError, parse_pairs


def test_parse_pairs_and_comments():
    pairs = parse_pairs("suite = thom\n# comment\nn=1  # trailing\n\nt=0.5,1\n")
    assert pairs == {"suite": "thom", "n": "1", "t": "0.5,1"}
    sc = Scenario.from_pairs(pairs).validate()
    assert sc.t == (0.5, 1.0) and sc.n == 1


@pytest.mark.parametrize("pairs", [
    {"suite": "nope"}, {"n": "0"}, {"mode": "fuzzy"}, {"t": "-1"}, {"lattice_scale": "0"},
    {"radius": "x"}, {"tol": "0"}, {"suite": "phi", "n": "2"}, {"bogus": "1"}, {"n": "two"},
])
def test_invalid_scenarios(pairs):
    with pytest.raises(ScenarioError):
        Scenario.from_pairs(pairs).validate()


def test_flags_override_file(tmp_path):
    f = tmp_path / "sc.txt"
    f.write_text("suite=lattice\nn=3\nseed=4\n")
    sc = Scenario.from_file(f).merged({"n": "1"})
    assert (sc.suite, sc.n, sc.seed) == ("lattice", 1, 4)


@given(st.integers(1, 4), st.integers(0, 99), st.sampled_from(["exact", "float"]))
def test_scenario_round_trip(n, seed, mode):
    sc = Scenario(suite="thom", n=n, seed=seed, mode=mode, t=(0.5, 2.0))
    assert sc.merged({}) == sc


def test_render_empty_and_failing():
    empty = {"header": {}, "payload": Report().payload()}
    text = render(empty)
    assert text.splitlines()[0].startswith("check") and "0/0" in text
    r = Report(checks=[make_check("x/fails", "a failing identity", 0.5, 1e-3)])
    row = [l for l in render({"payload": r.payload()}).splitlines() if l.startswith("x/fails")][0]
    assert "FAIL" in row and "5.000e-01" in row and "1.0e-03" in row
    with pytest.raises(ValueError):
        render({"nope": 1})


def test_report_rejects_duplicate_ids():
    r = Report()
    r.add(make_check("a", "x", 0.0, 1.0))
    with pytest.raises(ValueError):
        r.add(make_check("a", "x", 0.0, 1.0))


def test_run_thom_rank_one(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code = main(["run", "--suite", "thom", "--n", "1", "--report", str(rep), "--quiet"])
    assert code == EXIT_OK
    doc = json.loads(rep.read_text())
    assert doc["payload"]["passed"] and "suite_wall_time" in doc["header"]
    assert main(["render", str(rep)]) == EXIT_OK
    assert "thom/transgression-delta/N1/exact" in capsys.readouterr().out


def test_run_is_deterministic(tmp_path):
    docs = []
    for k in range(2):
        rep = tmp_path / f"r{k}.json"
        main(["run", "--suite", "lattice", "--n", "1", "--t", "1", "--report", str(rep), "--quiet"])
        docs.append(json.loads(rep.read_text()))
    assert payload_bytes(docs[0]) == payload_bytes(docs[1])


def test_failing_suite_exit_status(tmp_path):
    # a tolerance far below rounding makes float checks fail
    code = main(["run", "--suite", "thom", "--n", "3", "--mode", "float", "--tol", "1e-30",
                 "--report", str(tmp_path / "r.json"), "--quiet"])
    assert code == EXIT_FAIL


def test_usage_errors(tmp_path, capsys):
    assert main(["run", "--suite", "phi", "--n", "2", "--report", str(tmp_path / "r.json")]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["run", "--suite", "nope"])
    assert exc.value.code == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["render", str(bad)]) == EXIT_USAGE
    assert main(["run", str(tmp_path / "missing.txt")]) == EXIT_USAGE


def test_csv_traces(tmp_path):
    out = tmp_path / "csv"
    main(["run", "--suite", "torsion", "--report", str(tmp_path / "r.json"), "--csv", str(out), "--quiet"])
    lines = (out / "torsion_integrand.csv").read_text().splitlines()
    assert lines[0] == "case,t,value" and len(lines) > 10
