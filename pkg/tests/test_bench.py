import warnings
from dataclasses import replace

import numpy as np
import pytest

from kanbench import bench
from kanbench.bench import (ConfigurationError, RunConfig, RunResult, aggregate_and_select,
                            build_model, evaluate, execute_run, generate_grid, parity_gap,
                            results_from_jsonl)
from kanbench.data import ConstantColumnWarning, load_csv, load_manifest, preprocess, registry_for
from kanbench.metrics import MetricsRecord

REGISTRY = load_manifest()


def fake_result(width, seed, acc, dataset="ds", model="KAN", status="ok"):
    cfg = RunConfig(dataset, model, width, width, seed)
    metrics = None if status != "ok" else MetricsRecord(acc, acc - 1, acc - 2, acc - 3, 1.0, 2.0, "macro")
    return RunResult(cfg, status, metrics, [0.1, 0.1], 0.2, 0.5, param_count=10 * width,
                     flops={"mflops": 0.01 * width})


@pytest.fixture
def toy_prepared(toy_data_dir):
    spec = registry_for(toy_data_dir)["toy"]
    raw = load_csv(spec, toy_data_dir)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConstantColumnWarning)
        return {seed: preprocess(raw, spec, seed) for seed in (0, 1)}


class TestGrid:
    def test_cardinality(self):
        configs = generate_grid(REGISTRY["breast_cancer"])
        assert len(configs) == 100
        assert len({c.key for c in configs}) == 100
        for model in ("KAN", "MLP"):
            mine = [c for c in configs if c.model == model]
            assert sorted({c.width_index for c in mine}) == list(range(1, 11))
            assert all(sum(c.width_index == i for c in mine) == 5 for i in range(1, 11))

    @pytest.mark.parametrize("d,c,expected", [(30, 2, (288, 332)), (10, 2, (108, 132))])
    def test_spot_parity(self, d, c, expected):
        p_kan, p_mlp, gap = parity_gap(d, c, 1)
        assert (p_kan, p_mlp) == expected
        assert gap == pytest.approx({288: 0.133, 108: 0.182}[p_kan], abs=1e-3)

    @pytest.mark.parametrize("name", sorted(REGISTRY))
    def test_parity_all_datasets(self, name):
        spec = REGISTRY[name]
        widths = {spec.expected_features, spec.paper_features}
        if spec.categorical_columns:
            widths |= set(range(spec.expected_features, 130))   # any one-hot width
        for d in widths:
            for i in range(1, 11):
                assert parity_gap(d, spec.n_classes, i, spec.width_scale)[2] <= 0.25, (d, i)

    def test_poker_widths(self):
        configs = generate_grid(REGISTRY["poker"])
        assert sorted({c.hidden for c in configs if c.model == "KAN"}) == list(range(10, 101, 10))
        assert sorted({c.hidden for c in configs if c.model == "MLP"}) == list(range(100, 1001, 100))

    def test_parity_violation(self):
        with pytest.raises(ConfigurationError, match="KAN has .* MLP has"):
            generate_grid(REGISTRY["breast_cancer"], grid_size=40)

    def test_fingerprint_tracks_hyperparameters(self):
        a = RunConfig("x", "KAN", 1, 1, 0)
        assert a.key != replace(a, lr=0.02).key
        assert a.key == RunConfig("x", "KAN", 1, 1, 0).key


class TestExecuteRun:
    def test_deterministic(self, toy_prepared):
        cfg = RunConfig("toy", "KAN", 2, 2, 0, epochs=2)
        a, b = execute_run(cfg, toy_prepared[0]), execute_run(cfg, toy_prepared[0])
        assert a.metrics == b.metrics and a.final_train_loss == b.final_train_loss
        assert a.ok and all(t > 0 for t in a.epoch_seconds)

    @pytest.mark.parametrize("model", ["KAN", "MLP"])
    def test_param_count_matches_model(self, toy_prepared, model):
        prep = toy_prepared[0]
        cfg = RunConfig("toy", model, 1, 3, 0, epochs=1)
        res = execute_run(cfg, prep)
        assert res.param_count == bench.param_count(model, prep.n_features, 3, 2)

    def test_zero_epochs_is_untrained_network(self, toy_prepared):
        prep = toy_prepared[0]
        cfg = RunConfig("toy", "MLP", 1, 10, 0, epochs=0)
        res = execute_run(cfg, prep)
        untrained = evaluate(build_model(cfg, prep.n_features, prep.n_classes), prep)
        assert res.metrics == untrained and res.epoch_seconds == []

    def test_divergence_marks_failed(self, toy_prepared):
        cfg = RunConfig("toy", "MLP", 1, 10, 0, epochs=3, lr=1e308)
        with np.errstate(all="ignore"):
            res = execute_run(cfg, toy_prepared[0])
        assert res.status == "failed" and "non-finite" in res.error

    def test_mismatched_inputs(self, toy_prepared):
        with pytest.raises(ConfigurationError):
            execute_run(RunConfig("other", "KAN", 1, 1, 0), toy_prepared[0])
        with pytest.raises(ConfigurationError):
            execute_run(RunConfig("toy", "KAN", 1, 1, 0), toy_prepared[1])

    def test_round_trip(self, toy_prepared):
        res = execute_run(RunConfig("toy", "KAN", 1, 1, 0, epochs=3), toy_prepared[0])
        back = RunResult.from_dict(res.to_dict())
        assert back.to_dict() == res.to_dict()


class TestSelection:
    def test_single_width_identical_seeds(self):
        report = aggregate_and_select([fake_result(4, s, 90.0) for s in range(5)])
        row = report.best[("ds", "KAN")]
        assert row.width_index == 4 and row.metrics["accuracy"].std == 0.0

    def test_best_width_three(self):
        accs = {1: 80, 2: 84, 3: 91, 4: 88, 5: 85}
        results = [fake_result(w, s, a + 0.1 * s) for w, a in accs.items() for s in range(5)]
        row = aggregate_and_select(results).best[("ds", "KAN")]
        assert row.width_index == 3
        assert row.metrics["f1"].mean == pytest.approx(90.2)

    def test_tie_goes_to_smaller_width(self):
        results = [fake_result(w, s, 90.0 if w in (2, 7) else 70.0) for w in range(1, 11) for s in range(5)]
        assert aggregate_and_select(results).best[("ds", "KAN")].width_index == 2

    def test_failures_excluded_and_counted(self):
        results = [fake_result(1, s, 80.0) for s in range(4)] + [fake_result(1, 4, 0, status="failed")]
        results += [fake_result(2, s, 0, status="failed") for s in range(5)]
        report = aggregate_and_select(results)
        assert report.failed_runs == 6
        assert report.omitted == [("ds", "KAN", 2)]
        row = report.best[("ds", "KAN")]
        assert (row.n_ok, row.n_failed) == (4, 1)

    def test_aggregation_matches_two_pass_oracle(self):
        rng = np.random.default_rng(0)
        accs = rng.uniform(80, 95, 5)
        row = aggregate_and_select([fake_result(1, s, a) for s, a in enumerate(accs)]).rows[0]
        mean = sum(accs) / 5
        std = (sum((a - mean) ** 2 for a in accs) / 4) ** 0.5
        assert abs(row.metrics["accuracy"].mean - mean) <= 1e-12
        assert abs(row.metrics["accuracy"].std - std) <= 1e-12

    def test_series_keyed_by_param_count(self):
        results = [fake_result(w, 0, 80 + w) for w in (3, 1, 2)]
        report = aggregate_and_select(results)
        assert [p for p, *_ in report.accuracy_series("ds", "KAN")] == [10, 20, 30]
        assert report.mflops_series("ds", "KAN")[0] == (10, 0.01)

    def test_corrupt_jsonl_lines(self):
        import json
        good = json.dumps(fake_result(1, 0, 80.0).to_dict())
        results, problems = results_from_jsonl([good, "{not json", "", good])
        assert len(results) == 2
        assert problems and problems[0].startswith("line 2")
