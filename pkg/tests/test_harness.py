import warnings

import pytest

from barrier_pcs.errors import InvalidParameterError
from barrier_pcs.harness import (
    CSV_HEADER,
    DEFAULT_SCHEDULE,
    PRESET_EXPERIMENTS,
    BenchmarkRecord,
    BenchmarkStore,
    BudgetWarning,
    Experiment,
    contract_hash,
    derive_seed,
    format_table_csv,
    make_benchmark,
    model_hash,
    run_convergence_table,
    write_table_csv,
)
from barrier_pcs.models import Model1D, SvModel
from barrier_pcs.symmetry import BarrierContract

DOWN = BarrierContract(95.0, 90.0)
BS = Model1D("bs", sigma=0.2)


def test_cube_rule_and_default_schedule():
    exp = Experiment("t", BS, DOWN)
    assert exp.schedule == (10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
    assert DEFAULT_SCHEDULE == exp.schedule
    assert exp.trials_for(10) == 1000
    assert exp.trials_for(100) == 1_000_000
    assert Experiment("t", BS, DOWN, trials=500).trials_for(100) == 500


def test_cube_rule_rows():
    rows = run_convergence_table(Experiment("t", BS, DOWN, schedule=(5, 10)))
    assert [(r.steps, r.trials) for r in rows] == [(5, 125), (10, 1000)]
    assert all(r.em.trials == r.trials and r.pcm.steps == r.steps for r in rows)


def test_empty_schedule_gives_empty_table():
    rows = run_convergence_table(Experiment("t", BS, DOWN, schedule=()))
    assert rows == []
    assert format_table_csv(rows) == ",".join(CSV_HEADER) + "\n"


@pytest.mark.parametrize(
    "kw",
    [
        dict(schedule=(20, 10)),
        dict(schedule=(10, 10)),
        dict(schedule=(0, 10)),
        dict(trials=0),
        dict(truth_source="value"),
        dict(truth_source="oracle"),
    ],
)
def test_experiment_validation(kw):
    with pytest.raises(InvalidParameterError):
        Experiment("t", BS, DOWN, **kw)


def test_analytic_truth_needs_black_scholes():
    with pytest.raises(InvalidParameterError):
        Experiment("t", SvModel(), DOWN, truth_source="analytic")


def test_csv_format(tmp_path):
    rows = run_convergence_table(Experiment("t", BS, DOWN, schedule=(4,), seed=3))
    text = format_table_csv(rows)
    head, line = text.splitlines()
    assert head == "M,n,em_mean,em_stderr,pcm_mean,pcm_stderr,em_err_pct,pcm_err_pct"
    fields = line.split(",")
    assert fields[:2] == ["64", "4"]
    for f in fields[2:]:
        digits = f.lstrip("-").replace(".", "").lstrip("0").split("e")[0]
        assert len(digits) <= 6
    assert float(fields[2]) == pytest.approx(rows[0].em.mean, rel=1e-5)
    out = write_table_csv(rows, tmp_path / "sub" / "t.csv")
    assert out.read_text() == text


def test_table_is_reproducible_across_workers():
    exp = Experiment("t", SvModel(), DOWN, "value", 7.92706, schedule=(10, 20, 30), seed=5)
    a = format_table_csv(run_convergence_table(exp, workers=1))
    b = format_table_csv(run_convergence_table(exp, workers=8))
    assert a == b


def test_cells_use_distinct_seeds():
    seeds = {derive_seed(0, est, n) for est in (0, 1) for n in DEFAULT_SCHEDULE}
    assert len(seeds) == 2 * len(DEFAULT_SCHEDULE)
    assert derive_seed(0, 1, 10) == derive_seed(0, 1, 10)
    assert all(0 <= s < 2**64 for s in seeds)


def test_zero_volatility_benchmark():
    rec = make_benchmark(Model1D("bs", sigma=0.0), DOWN, 50, 1000, seed=1)
    assert rec.mean == pytest.approx(5.0, abs=1e-12)
    assert rec.stderr == 0.0


def test_store_round_trip(tmp_path):
    store = BenchmarkStore(tmp_path / "bench.csv")
    assert store.records() == []
    m = SvModel("heston", r=0.02)
    rec = make_benchmark(m, DOWN, 10, 2000, seed=9, store=store)
    again = make_benchmark(m, DOWN, 10, 2000, seed=123, store=store)
    assert again == rec  # reused, not recomputed
    assert store.records() == [rec]
    line = store.path.read_text().strip()
    assert line.split(",")[:5] == [model_hash(m), contract_hash(DOWN), "10", "2000", "9"]
    assert BenchmarkRecord.from_line(line) == rec
    assert store.find(m, DOWN, 10, 2001) is None


def test_hashes_separate_parameters():
    assert model_hash(SvModel(r=0.0)) != model_hash(SvModel(r=0.02))
    assert contract_hash(DOWN) != contract_hash(BarrierContract(95.0, 90.0, width=20.0))
    assert model_hash(BS) == model_hash(Model1D("bs", sigma=0.2))


def test_malformed_record_rejected():
    with pytest.raises(ValueError):
        BenchmarkRecord.from_line("a,b,1,2")


def test_budget_warning():
    with pytest.warns(BudgetWarning):
        make_benchmark(BS, DOWN, 10, 100, limit=999)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        make_benchmark(BS, DOWN, 10, 100, limit=1000)


def test_preset_experiments_are_complete():
    assert len(PRESET_EXPERIMENTS) == 12
    double = PRESET_EXPERIMENTS["heston-double"]
    assert double.contract.is_double and double.contract.upper == 115.0
    assert PRESET_EXPERIMENTS["sabr-double"].contract.upper == 110.0
    assert sum(e.truth_source == "analytic" for e in PRESET_EXPERIMENTS.values()) == 4


@pytest.mark.slow
def test_black_scholes_table_shape():
    rows = run_convergence_table(PRESET_EXPERIMENTS["bs-sigma0.5-r0.02"], workers=4)
    assert len(rows) == 10
    assert rows[-1].em_err < rows[0].em_err
    for r in rows:
        if r.steps >= 30:
            assert r.pcm_err < r.em_err
