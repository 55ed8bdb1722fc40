import json
import math

import numpy as np
import pytest

import mecoffload.harness as harness
from mecoffload.cli import main
from mecoffload.config import GeometryConfig, RunConfig, SystemParams
from mecoffload.harness import (COLUMNS, ExperimentSpec, ResultRow, ResultTable, SpecError,
                                run_experiment, summarize)
from mecoffload.orchestrator import RunError
from mecoffload.scenario import make_scenario

TINY = RunConfig(GeometryConfig(num_users=3, num_sbs=1), SystemParams(num_subcarriers=4))


def tiny_spec(experiment="sweep_users", values=(2, 3), seeds=(0, 1), schemes=("proposed", "FC")):
    return ExperimentSpec(experiment, values, seeds=seeds, schemes=schemes, base=TINY)


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny")
    spec = tiny_spec()
    return spec, run_experiment(spec, out), out


def test_spec_validation():
    with pytest.raises(SpecError):
        ExperimentSpec("nope")
    with pytest.raises(SpecError):
        ExperimentSpec("sweep_users", seeds=())
    with pytest.raises(SpecError):
        ExperimentSpec("sweep_users", schemes=("proposed", "XYZ"))
    with pytest.raises(SpecError):
        ExperimentSpec("sweep_users", values=(2.5,))
    with pytest.raises(SpecError):
        ExperimentSpec("sweep_capacity", values=(-1.0,))


def test_default_grids_and_cardinality():
    spec = ExperimentSpec("sweep_users")
    assert spec.values == (10, 15, 20, 25, 30, 35, 40, 45)
    assert len(spec.tasks()) == 320
    assert ExperimentSpec("sweep_weight").values == (1, 2, 5, 10, 20)
    assert ExperimentSpec("sweep_parallel").values == (1, 2, 3, 4, 5)
    cap = ExperimentSpec("sweep_capacity").values
    assert cap[0] == 5e10 and cap[-1] == 4e11 and len(cap) == 8


def test_point_configs():
    par = ExperimentSpec("sweep_parallel").point_config(2, 5e7)
    assert par.params.max_parallel == 2 and par.params.bandwidth == 5e7
    assert [t.parallelism for t in par.tasks] == [1, 2, 2]
    assert ExperimentSpec("sweep_capacity").point_config(1e11, 1e7).params.mec_capacity == 1e11
    assert ExperimentSpec("sweep_weight").point_config(5, 1e7).params.weight == 5
    assert ExperimentSpec("sweep_users").point_config(15, 1e7).geometry.num_users == 15


def test_rows_complete_and_decomposed(tiny_run):
    spec, table, _ = tiny_run
    assert len(table.rows) == 2 * 2 * 2
    for r in table.rows:
        assert r.status == "ok"
        assert r.utility == pytest.approx(r.revenue + r.cost + math.log(1.0) * r.counted, abs=1e-9)
        assert r.infeasible >= 0 and r.counted + r.infeasible <= r.value
    keys = [(r.scheme, r.value, r.seed) for r in table.rows]
    assert len(set(keys)) == len(keys)


def test_outputs_written(tiny_run):
    spec, table, out = tiny_run
    for name in ("sweep_users.csv", "sweep_users_timing.csv", "sweep_users_summary.csv",
                 "sweep_users.svg"):
        assert (out / name).exists()
    header = (out / "sweep_users.csv").read_text().splitlines()[0]
    assert header == ",".join(COLUMNS)
    assert "wall_time" not in header
    assert ResultTable.read_csv(out / "sweep_users.csv").to_csv() == table.to_csv()


def test_rerun_is_byte_identical(tiny_run, tmp_path):
    spec, _, out = tiny_run
    run_experiment(spec, tmp_path)
    for name in ("sweep_users.csv", "sweep_users_summary.csv", "sweep_users.svg"):
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes()


def test_cache_and_workers_give_same_table(tiny_run, tmp_path):
    spec, table, _ = tiny_run
    cached = run_experiment(spec, cache_dir=tmp_path / "cache")
    again = run_experiment(spec, cache_dir=tmp_path / "cache")
    assert cached.to_csv() == table.to_csv() == again.to_csv()
    parallel = run_experiment(spec, workers=2)
    assert parallel.to_csv() == table.to_csv()


def test_cached_rows_take_the_current_label(tmp_path):
    users = tiny_spec(values=(3,), seeds=(0,), schemes=("proposed",))
    conv = tiny_spec("convergence", values=(3,), seeds=(0,), schemes=("proposed",))
    run_experiment(users, cache_dir=tmp_path)
    table = run_experiment(conv, cache_dir=tmp_path)
    assert table.rows[0].experiment == "convergence"
    assert all(t[0] == "convergence" for t in table.traces)


def test_convergence_traces(tmp_path):
    spec = tiny_spec("convergence", values=(3,))
    table = run_experiment(spec, tmp_path)
    text = (tmp_path / "convergence_traces.csv").read_text().splitlines()
    assert text[0].startswith("experiment,scheme,value,bandwidth,seed,iteration")
    for r in table.rows:
        its = [t[5] for t in table.traces if t[1] == r.scheme and t[4] == r.seed]
        assert its[0] == 0 and max(its) == r.outer_iterations <= 10


def test_weight_sweep_has_revenue_and_cost(tmp_path):
    spec = tiny_spec("sweep_weight", values=(1, 10), seeds=(0,), schemes=("proposed",))
    table = run_experiment(spec, tmp_path)
    for r in table.rows:
        assert r.utility == pytest.approx(r.revenue + r.cost + math.log(r.value) * r.counted,
                                          abs=1e-9)
    assert "revenue_mean" in (tmp_path / "sweep_weight_summary.csv").read_text()


def test_errors_become_statuses(monkeypatch):
    calls = iter([RunError("all infeasible"), ValueError("boom")])

    def failing(*a, **k):
        raise next(calls)
    monkeypatch.setattr(harness, "run_scheme", failing)
    table = run_experiment(tiny_spec(values=(3,), seeds=(0, 1), schemes=("proposed",)))
    assert [r.status for r in table.rows] == ["run_error", "error:ValueError"]
    assert all(r.infeasible >= 0 for r in table.rows)


def test_unflagged_violation_detected(monkeypatch):
    real = harness.run_scheme

    def sloppy(*a, **k):
        res = real(*a, **k)
        res.state.f[:] = 0.0
        res.state.x[:] = 1.0
        from mecoffload.model import system_utility
        res.report = system_utility(a[1], a[2], res.state)
        res.flagged = []
        return res
    monkeypatch.setattr(harness, "run_scheme", sloppy)
    table = run_experiment(tiny_spec(values=(3,), seeds=(0,), schemes=("proposed",)))
    assert table.rows[0].status == "violation"


# -- summaries ----------------------------------------------------------------

def row(value, seed, utility, revenue=0.0, cost=0.0, counted=1, scheme="proposed"):
    return ResultRow("sweep_weight", scheme, value, 1e7, seed, "ok", utility, revenue, cost,
                     counted, 0, True, 3)


def test_summary_statistics():
    table = ResultTable([row(1.0, 0, 5.0), row(2.0, 0, 7.0), row(2.0, 1, 7.0)])
    s = summarize(table)
    assert [x[4] for x in s] == [1, 2]          # seed counts
    assert s[0][7] == 0.0                        # single seed -> std 0
    assert s[1][6] == 7.0 and s[1][7] == 0.0     # constant column
    assert math.isnan(s[0][11]) and s[1][11] == pytest.approx(2.0)
    with pytest.raises(SpecError):
        summarize(ResultTable())


def test_summary_mean_decomposition():
    rng = np.random.default_rng(0)
    rows = []
    for seed in range(5):
        rev, cost, n = rng.normal(10), rng.normal(20), 7
        rows.append(row(5.0, seed, rev + cost + math.log(5.0) * n, rev, cost, n))
    s = summarize(ResultTable(rows))[0]
    assert s[6] == pytest.approx(s[8] + s[9] + math.log(5.0) * 7, rel=1e-12)


# -- command line ---------------------------------------------------------------

def test_cli_help_documents_columns(capsys):
    with pytest.raises(SystemExit):
        main(["run", "--help"])
    out = capsys.readouterr().out
    assert ", ".join(COLUMNS) in out
    assert "exit codes" in out


def test_cli_exit_codes(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(TINY.to_dict()))
    assert main(["run", "sweep_users", "--schemes", "XYZ", "--out-dir", str(tmp_path)]) == 2
    assert main(["run", "sweep_users", "--values", "2.5", "--out-dir", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"params": {"bandwidth": -1}}))
    assert main(["run", "sweep_users", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert main(["run", "sweep_weight", "--values", "1,2", "--seeds", "1", "--schemes", "proposed",
                 "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    assert main(["summarize", str(tmp_path / "sweep_weight.csv"),
                 "-o", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").read_text().startswith("experiment,scheme,value")


def test_cli_replay(tmp_path, capsys):
    sc = make_scenario(TINY.geometry, 4, TINY.tasks, 4)
    sc.save(tmp_path / "scenario.json")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(TINY.to_dict()))
    code = main(["replay", str(tmp_path / "scenario.json"), "--config", str(cfg),
                 "--schemes", "proposed,WCR", "--out-dir", str(tmp_path / "runs")])
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("utility=") == 2
    assert json.loads((tmp_path / "runs" / "WCR.json").read_text())["scheme"] == "WCR"
    assert main(["replay", str(tmp_path / "missing.json")]) == 2
