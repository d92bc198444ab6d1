import json

import numpy as np
import pytest

from cubic_portfolio.bench import (
    SCHEMA_VERSION,
    WORKERS_ENV,
    ExperimentSpec,
    ResultRecord,
    aggregate,
    compare,
    load_records,
    read_csv_table,
    render_report,
    run_experiment,
    summarize,
    table_to_text,
    tables_for,
    worker_count,
)
from cubic_portfolio.hamd import TTT_FRACTIONS


def fake_record(solver, seed, value, kind="multiseed", mode=None, mult=None, n=200, K=40, feas=None):
    if solver == "hamd" and mode is None:
        mode = "full"
    if solver != "hamd" and mult is None:
        mult = 1.0
    if solver != "hamd" and feas is None:
        feas = dict(augmented_matrix_energy=-1e6, decoded_native_objective=value, cardinality=K,
                    card_violation=0, aux_viol_count=0, aux_viol_rate=0.0, false_positive_count=0,
                    false_negative_count=0, card_penalty=0.0, rosenberg_penalty=0.0, penalty_fraction=0.0)
    return ResultRecord(kind=kind, n=n, K=K, instance_seed=42, n_triples=4 * n, solver=solver, seed=seed,
                        config={}, native_objective=value, cardinality=K, selection=list(range(K)),
                        ttt=[value] * 5, mode=mode, lambda_multiplier=mult,
                        lambda_K=None if solver == "hamd" else 1000.0 * mult, feasibility=feas,
                        random_reference=2000.0)


def three_seed_example():
    seeds = (42, 1042, 2042)
    sa = [fake_record("sa", s, v) for s, v in zip(seeds, (1621.60, 1026.08, 1208.07))]
    hamd = [fake_record("hamd", s, 195.65) for s in seeds]
    return sa + hamd


def test_aggregate_three_seed_example():
    g = aggregate(three_seed_example())
    sa = g.stats["sa"]
    assert sa.median == 1208.07
    assert round(sa.std, 2) == 249.17
    assert g.stats["hamd"].std == 0.0
    c = g.comparisons["sa"]
    assert (c.wins, c.ties, c.losses) == (0, 0, 3) and c.wtl == "0/0/3"
    assert round(100 * c.median_gap, 1) == 83.8
    text = table_to_text(tables_for(summarize(three_seed_example())["multiseed"])[0])
    assert "1,208.07" in text and "249.17" in text and "+83.8%" in text and "0/0/3" in text


def test_identical_values_are_all_ties():
    c = compare("sa", {1: 5.0, 2: 7.0}, {1: 5.0, 2: 7.0 * (1 + 1e-12)})
    assert c.wtl == "0/2/0" and c.median_gap == pytest.approx(0.0, abs=1e-11)
    c = compare("sa", {1: 5.0, 2: 7.0}, {1: 6.0, 2: 6.0})
    assert c.wtl == "1/0/1"


def test_single_record_per_solver():
    g = aggregate([fake_record("sa", 1, 10.0), fake_record("hamd", 1, 4.0)])
    assert g.stats["sa"].median == 10.0 and g.stats["sa"].std == 0.0
    assert g.comparisons["sa"].median_gap == pytest.approx(0.6)


def test_mismatched_inputs_are_rejected():
    with pytest.raises(ValueError, match="seed"):
        aggregate([fake_record("sa", 1, 1.0), fake_record("hamd", 2, 1.0)])
    with pytest.raises(ValueError):
        aggregate([fake_record("sa", 1, 1.0), fake_record("sa", 1, 2.0)])
    with pytest.raises(ValueError):
        aggregate([fake_record("sa", 1, 1.0), fake_record("hamd", 1, 1.0, n=100, K=20)])
    with pytest.raises(ValueError):
        aggregate([])


def test_render_errors(tmp_path):
    summary = summarize(three_seed_example())["multiseed"]
    with pytest.raises(ValueError, match="format"):
        render_report(summary, "xlsx", tmp_path)
    empty = type(summary)("multiseed", [])
    with pytest.raises(ValueError):
        render_report(empty, "csv", tmp_path)
    assert not list(tmp_path.iterdir())


def test_csv_round_trip_is_exact(tmp_path):
    recs = three_seed_example()
    recs[0].native_objective = 1 / 3
    summary = summarize(recs)["multiseed"]
    paths = render_report(summary, "csv", tmp_path)
    assert {p.name for p in paths} == {"multiseed-multiseed.csv", "multiseed-per_seed.csv",
                                       "multiseed-feasibility.csv"}
    for table in tables_for(summary):
        headers, rows = read_csv_table((tmp_path / f"multiseed-{table.name}.csv").read_text())
        assert headers == table.headers
        assert rows == table.rows
    text_paths = render_report(summary, "table-text", tmp_path)
    assert all(p.suffix == ".txt" and p.read_text() for p in text_paths)


def test_scaling_and_sensitivity_table_columns():
    recs = [fake_record(s, 42, v, kind="scaling") for s, v in (("hamd", 200.0), ("sa", 1500.0), ("tabu", 1400.0))]
    t = tables_for(summarize(recs)["scaling"])[0]
    assert t.headers == ["n", "K", "random_ref", "hamd", "sa", "tabu", "gap_hamd_vs_tabu"]
    assert t.rows[0][-1] == pytest.approx((1400 - 200) / 1400)
    recs = [fake_record("hamd", 42, 200.0, kind="sensitivity")]
    recs += [fake_record(s, 42, 1000.0 + m, kind="sensitivity", mult=m)
             for s in ("sa", "tabu") for m in (0.5, 1.0, 2.0)]
    t = tables_for(summarize(recs)["sensitivity"])[0]
    assert t.headers == ["n", "K", "solver", "lambda_mult", "lambda_K", "native_obj", "card_viol",
                         "aux_rate", "penalty_fraction"]
    assert len(t.rows) == 7
    assert [r[3] for r in t.rows[1:]] == [0.5, 0.5, 1.0, 1.0, 2.0, 2.0]


def test_spec_validation_and_defaults():
    spec = ExperimentSpec(kind="sensitivity", budget_iters=10)
    assert spec.multipliers == (0.5, 1.0, 2.0) and spec.seeds == (42, 1042, 2042)
    assert sum(c.solver != "hamd" for c in spec.cells()) == 18
    assert len(ExperimentSpec(kind="ablation", budget_iters=10).cells()) == 4
    assert len(ExperimentSpec(kind="exact", budget_iters=10).cells()) == 9
    for bad in [dict(kind="nope", budget_iters=1), dict(kind="single"),
                dict(kind="single", budget_iters=1, budget_secs=1.0),
                dict(kind="single", budget_iters=1, sizes=()), dict(kind="single", budget_iters=1, seeds=()),
                dict(kind="single", budget_iters=1, multipliers=(2.0,)),
                dict(kind="single", budget_iters=1, solvers=("cplex",)),
                dict(kind="single", budget_iters=1, modes=("warp",)),
                dict(kind="single", budget_iters=1, sizes=((10, 10),)),
                dict(kind="single", budget_iters=1, seeds=(1, 1))]:
        with pytest.raises(ValueError):
            ExperimentSpec(**bad)


def test_unwritable_output_is_reported(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    spec = ExperimentSpec(kind="single", sizes=((20, 4),), budget_iters=5, out=str(blocker / "sub"))
    with pytest.raises(OSError, match="not writable"):
        run_experiment(spec)


def test_record_json_round_trip_and_version_check(tmp_path):
    rec = fake_record("sa", 7, 12.5)
    d = json.loads(rec.to_json())
    assert ResultRecord.from_dict(d) == rec
    with pytest.raises(ValueError, match="version"):
        ResultRecord.from_dict(d | {"schema_version": SCHEMA_VERSION + 1})
    with pytest.raises(ValueError, match="unknown"):
        ResultRecord.from_dict(d | {"surprise": 1})
    with pytest.raises(ValueError):
        ResultRecord(**(d | {"ttt_fractions": [0.5, 1.0]}))
    (tmp_path / rec.file_name()).write_text(rec.to_json())
    assert load_records(tmp_path) == [rec]


def test_worker_count_comes_from_environment(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert worker_count() == 1
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert worker_count() == 3
    for bad in ("0", "many"):
        monkeypatch.setenv(WORKERS_ENV, bad)
        with pytest.raises(ValueError):
            worker_count()


def test_small_experiment_end_to_end(tmp_path):
    spec = ExperimentSpec(kind="multiseed", sizes=((30, 6),), seeds=(1, 2), budget_iters=50,
                          reference_trials=50, out=str(tmp_path))
    records, summary = run_experiment(spec)
    assert len(records) == 6
    for r in records:
        assert len(r.ttt) == len(TTT_FRACTIONS) and r.wall_time is None
        assert r.random_reference is not None
        if r.solver == "hamd":
            assert r.cardinality == 6
        else:
            assert r.feasibility is not None and len(r.state) == 30 + r.n_triples
    assert len(list((tmp_path / "records").glob("*.json"))) == 6
    assert (tmp_path / "multiseed-multiseed.csv").exists()
    again = load_records(tmp_path / "records")
    assert [r.to_json() for r in again] == [r.to_json() for r in records]
    assert summary.groups[0].comparisons.keys() == {"sa", "tabu"}


def test_matched_wall_clock_budgets(tmp_path):
    spec = ExperimentSpec(kind="single", sizes=((30, 6),), budget_secs=0.3, reference_trials=20)
    records, _ = run_experiment(spec)
    assert {r.solver for r in records} == {"hamd", "sa", "tabu"}
    for r in records:
        assert 0 < r.wall_time <= 0.3 * 1.1
        budget = r.config.get("budget_secs")
        assert budget == 0.3


def test_parallel_cells_match_serial(monkeypatch):
    spec = ExperimentSpec(kind="ablation", sizes=((30, 6),), budget_iters=40, reference_trials=10)
    serial, _ = run_experiment(spec)
    monkeypatch.setenv(WORKERS_ENV, "2")
    parallel, _ = run_experiment(spec)
    assert [r.to_json() for r in serial] == [r.to_json() for r in parallel]
    assert np.isfinite([r.native_objective for r in serial]).all()
