import json

import pytest

from fedpred.config import parse_config_text
from fedpred.experiment import (
    CSV_COLUMNS,
    evaluate_saved_ensemble,
    load_results,
    parse_results_csv,
    run_experiment,
    summarize,
    summary_csv,
    curves_csv,
)

TINY_CLASSIFICATION = """
task = classification
dataset = blobs
data.n = 120
data.classes = 3
data.features = 4
data.separation = 6.0
n_clients = 2
heterogeneity = 0.0,0.5
methods = predictive_bayes,fedavg_1round
seeds = 0,1
arch.hidden = 8
sgd.epochs = 3
sgd.batch_size = 16
csghmc.cycles = 2
csghmc.epochs_per_cycle = 4
csghmc.initial_step = 5e-5
csghmc.batch_size = 16
csghmc.samples_per_cycle = 2
output_dir = {out}
"""

TINY_REGRESSION = """
task = regression
dataset = sine
data.n = 80
data.noise_std = 0.1
n_clients = 2
heterogeneity = 0.0
methods = predictive_bayes,fedavg
seeds = 3
arch.hidden = 8
sgd.epochs = 4
sgd.batch_size = 16
fedavg.rounds = 2
csghmc.cycles = 2
csghmc.epochs_per_cycle = 4
csghmc.initial_step = 1e-4
csghmc.batch_size = 16
csghmc.samples_per_cycle = 2
save_ensembles = true
output_dir = {out}
"""


@pytest.fixture
def tiny_outcome(tmp_path):
    cfg = parse_config_text(TINY_CLASSIFICATION.format(out=tmp_path / "runs"))
    return cfg, run_experiment(cfg), tmp_path / "runs"


class TestRunExperiment:
    def test_cell_count_is_cartesian_product(self, tiny_outcome):
        _, outcome, _ = tiny_outcome
        assert len(outcome.results) == 2 * 2 * 2  # methods x seeds x heterogeneity
        assert not outcome.failures

    def test_metrics_present_for_task(self, tiny_outcome):
        _, outcome, _ = tiny_outcome
        for r in outcome.results:
            assert set(r.metrics) == {"accuracy", "nll", "ece"}

    def test_rounds_by_method(self, tiny_outcome):
        _, outcome, _ = tiny_outcome
        for r in outcome.results:
            assert r.rounds == 1

    def test_csv_and_jsonl_written(self, tiny_outcome):
        _, outcome, out_dir = tiny_outcome
        csv_text = (out_dir / "results.csv").read_text()
        assert csv_text.splitlines()[0] == ",".join(CSV_COLUMNS)
        assert len(csv_text.splitlines()) == 1 + len(outcome.results)
        lines = (out_dir / "results.jsonl").read_text().splitlines()
        assert len(lines) == len(outcome.results)
        json.loads(lines[0])

    def test_csv_round_trip_exact(self, tiny_outcome):
        _, outcome, out_dir = tiny_outcome
        parsed = parse_results_csv((out_dir / "results.csv").read_text())
        assert len(parsed) == len(outcome.results)
        for a, b in zip(parsed, outcome.results):
            assert a.metrics == b.metrics  # float equality: repr round-trips
            assert (a.method, a.seed, a.heterogeneity) == (b.method, b.seed, b.heterogeneity)
            assert a.uplink_bytes == b.uplink_bytes

    def test_rerun_reproduces_metrics_bitwise(self, tmp_path):
        cfg = parse_config_text(TINY_CLASSIFICATION.format(out=tmp_path / "a"))
        first = run_experiment(cfg)
        cfg2 = parse_config_text(TINY_CLASSIFICATION.format(out=tmp_path / "b"))
        second = run_experiment(cfg2)
        for a, b in zip(first.results, second.results):
            assert a.metrics == b.metrics

    def test_load_results_round_trip(self, tiny_outcome):
        _, outcome, out_dir = tiny_outcome
        loaded = load_results(out_dir)
        assert [r.to_dict()["metrics"] for r in loaded] == [
            r.to_dict()["metrics"] for r in outcome.results
        ]


class TestSummaries:
    def test_summary_mean_within_seed_range(self, tiny_outcome):
        _, outcome, _ = tiny_outcome
        rows = summarize(outcome.results)
        for row in rows:
            values = [
                r.metrics[row.metric]
                for r in outcome.results
                if r.method == row.method and r.heterogeneity == row.heterogeneity
            ]
            assert min(values) <= row.mean <= max(values)
            assert row.n_seeds == 2

    def test_duplicate_seeds_give_zero_std(self, tmp_path):
        text = TINY_CLASSIFICATION.format(out=tmp_path / "runs").replace(
            "seeds = 0,1", "seeds = 0,0"
        )
        outcome = run_experiment(parse_config_text(text))
        for row in summarize(outcome.results):
            assert row.std == 0.0

    def test_summary_csv_deterministic(self, tiny_outcome):
        _, outcome, _ = tiny_outcome
        rows = summarize(outcome.results)
        assert summary_csv(rows) == summary_csv(rows)

    def test_curves_csv_shape(self, tiny_outcome):
        _, outcome, _ = tiny_outcome
        text = curves_csv(summarize(outcome.results), "accuracy")
        lines = text.strip().splitlines()
        assert lines[0] == "heterogeneity,fedavg_1round,predictive_bayes"
        assert len(lines) == 3  # header + two heterogeneity levels


class TestSavedEnsembles:
    def test_eval_reproduces_training_metric(self, tmp_path):
        cfg = parse_config_text(TINY_REGRESSION.format(out=tmp_path / "runs"))
        outcome = run_experiment(cfg)
        target = outcome.results[0]
        ens_dir = (
            tmp_path / "runs" / "ensembles"
            / f"{target.method}_seed{target.seed}_h{target.heterogeneity:g}"
        )
        metrics = evaluate_saved_ensemble(ens_dir, cfg)
        assert metrics == target.metrics

    def test_failure_recorded_not_raised(self, tmp_path):
        text = TINY_CLASSIFICATION.format(out=tmp_path / "runs").replace(
            "csghmc.initial_step = 5e-5", "csghmc.initial_step = 1e6"
        )
        outcome = run_experiment(parse_config_text(text))
        assert outcome.failures
        assert all("diverged" in f.error or "non-finite" in f.error for f in outcome.failures)
        # fedavg cells are unaffected by the sampler step size
        assert any(r.method == "fedavg_1round" for r in outcome.results)
