import numpy as np
import pytest

from saea import harness, optim, profile, traffic
from saea import surrogate as sg

FAST = sg.TrainConfig(epochs=2)


@pytest.fixture(scope="module")
def small_instance():
    return traffic.generate_instance(3, (2, 2), 30, 200)


@pytest.fixture(scope="module")
def archive(small_instance):
    return harness.eval_bench(small_instance, 160, seed=5, track_memory=False)


class TestCsv:
    def test_round_trip(self, tmp_path):
        path = harness.write_csv(tmp_path / "a.csv", [{"x": 1, "y": "b"}], ("x", "y"))
        assert path.read_text().splitlines()[0] == "schema_version,x,y"
        assert harness.read_csv(path, ("x",)) == [{"schema_version": "1", "x": "1", "y": "b"}]

    def test_missing_column_named(self, tmp_path):
        path = harness.write_csv(tmp_path / "a.csv", [{"x": 1}], ("x",))
        with pytest.raises(harness.SchemaError, match="mape"):
            harness.read_csv(path, ("x", "mape"))

    def test_unknown_version(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("schema_version,x\n99,1\n")
        with pytest.raises(harness.SchemaError, match="99"):
            harness.read_csv(path)

    def test_no_version_column(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("x\n1\n")
        with pytest.raises(harness.SchemaError, match="schema_version"):
            harness.read_csv(path)


class TestExperimentSpec:
    def test_valid(self):
        spec = harness.ExperimentSpec("run", seeds=(1, 2, 3), params={"grid": [128]})
        assert spec.repetitions == 1

    @pytest.mark.parametrize("kwargs", [
        {"kind": "bogus"},
        {"kind": "run", "repetitions": 0},
        {"kind": "run", "seeds": (1, 1)},
        {"kind": "train-bench", "params": {"grid": [0, 128]}},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            harness.ExperimentSpec(**kwargs)


class TestEvalBench:
    def test_rows_match_objective(self, small_instance, archive):
        assert len(archive.rows) == 160
        for row in archive.rows[:5]:
            x = np.array([int(v) for v in row["solution"].split()])
            assert row["F"] == traffic.objective(small_instance, x)
            assert row["source"] == "proxy" and row["cpu_j"] > 0

    def test_summary_metrics(self, archive):
        assert [r["metric"] for r in archive.summary] == list(harness.EVAL_METRICS)

    def test_seeded(self, small_instance, archive):
        again = harness.eval_bench(small_instance, 160, seed=5, track_memory=False)
        np.testing.assert_array_equal(again.X, archive.X)

    def test_csv_doubles_as_archive(self, small_instance, tmp_path):
        res = harness.eval_bench(small_instance, 12, seed=0, out_dir=tmp_path)
        X, y = harness.load_archive(tmp_path / "eval_bench.csv")
        np.testing.assert_array_equal(X, res.X)
        np.testing.assert_allclose(y, res.y, rtol=1e-15)
        assert (tmp_path / "eval_summary.csv").exists()

    def test_nonpositive_metric_is_na(self):
        rows = [{m: 1.0 + k for m in harness.EVAL_METRICS} for k in range(5)]
        for r in rows:
            r["peak_alloc_b"] = 0
        out = {r["metric"]: r for r in harness.lognormal_summary(rows, "t", "i")}
        assert out["peak_alloc_b"]["E"] == "NA"
        assert out["cpu_j"]["E"] != "NA"


class TestSplits:
    def test_disjoint_and_nested(self):
        tr_small, te_small = harness.split_indices(500, 64, rep=2, seed=9)
        tr_big, te_big = harness.split_indices(500, 256, rep=2, seed=9)
        assert not set(tr_big) & set(te_big)
        np.testing.assert_array_equal(te_small, te_big)
        np.testing.assert_array_equal(tr_big[:64], tr_small)

    def test_reps_differ(self):
        a, _ = harness.split_indices(500, 64, rep=0, seed=9)
        b, _ = harness.split_indices(500, 64, rep=1, seed=9)
        assert not np.array_equal(a, b)


class TestTrainBench:
    def test_archive_too_small(self, archive):
        with pytest.raises(ValueError, match=r"feasible sizes: \[32\]"):
            harness.train_bench(archive.X, archive.y, grid=(32, 128), repetitions=1, train_cfg=FAST)

    def test_rows_and_quality(self, archive, tmp_path):
        res = harness.train_bench(archive.X, archive.y, grid=(16, 32), repetitions=2, test_size=20,
                                  train_cfg=FAST, track_memory=False, out_dir=tmp_path, save_nets=True)
        assert len(res.training) == 4 and len(res.use) == 4 * 20 and len(res.quality) == 4
        first = [u for u in res.use if u["size"] == 16 and u["rep"] == 0]
        actual = np.array([u["actual"] for u in first])
        pred = np.array([u["predicted"] for u in first])
        mape = next(q["mape"] for q in res.quality if q["size"] == 16 and q["rep"] == 0)
        assert mape == pytest.approx(100 * np.mean(np.abs(pred - actual) / actual))
        assert all(t["n_p"] == sg.param_count(sg.NetSpec.for_dimension(archive.X.shape[1])) for t in res.training)
        assert len(list((tmp_path / "nets").glob("*.npz"))) == 4
        summary, hist = harness.sparsity_report(sorted((tmp_path / "nets").glob("*.npz")), archive.X[:10])
        assert len(summary) == 4 and all(0 <= s["zero_ratio_hidden1"] <= 100 for s in summary)
        assert sum(h["count"] for h in hist if h["layer"].endswith(":b3")) == 4


@pytest.fixture(scope="module")
def result(small_instance, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    res = harness.run_experiment(
        small_instance, algorithms=("ga",), n_ts=(20,), runs=3,
        base=optim.RunConfig(population_size=10, max_fe=60), train_cfg=FAST,
        track_memory=False, audit_per_generation=3, out_dir=out,
    )
    return res, out


class TestRunExperiment:
    def test_variants(self, result):
        res, _ = result
        keys = {(s["strategy"], s["n_t"]) for s in res.summary}
        assert keys == {("none", "NA"), ("pretrain", 20), ("retrain", 20)}
        assert len(res.summary) == 9

    def test_pretrain_counts(self, result):
        res, _ = result
        for s in res.summary:
            if s["strategy"] == "pretrain":
                assert s["true_evaluations"] == 21
            if s["strategy"] == "none":
                assert s["true_evaluations"] == 60 and s["trainings"] == 0

    def test_profile_rows(self, result):
        res, _ = result
        none_rows = [r for r in res.profiles if r["strategy"] == "none" and r["seed"] == 0]
        assert [r["component"] for r in none_rows] == [*profile.COMPONENTS, "Total"]
        training = next(r for r in none_rows if r["component"] == "Training")
        assert training["total_j"] == "NA"

    def test_audit_on_lower_median(self, result):
        res, _ = result
        pre = sorted((s["best_F"], s["seed"]) for s in res.summary if s["strategy"] == "pretrain")
        audited = {r["seed"] for r in res.audit if r["strategy"] == "pretrain"}
        assert audited == {pre[1][1]}
        assert all(r["n_audited"] <= 3 for r in res.audit)

    def test_files(self, result):
        _, out = result
        fe = harness.read_csv(out / "run_fe_trace.csv", ("fe_index", "true_best_F", "cumulative_j"))
        for seed in ("0", "1", "2"):
            best = [float(r["true_best_F"]) for r in fe if r["seed"] == seed and r["strategy"] == "none"]
            assert len(best) == 60 and all(b <= a for a, b in zip(best, best[1:]))
        report = harness.analyze("profile", [out / "run_profiles.csv"])
        assert {r["component"] for r in report} == {*profile.COMPONENTS, "Total"}
        ga_none = [r for r in report if r["strategy"] == "none" and r["measure"] == "wall_s"]
        assert all(r["n"] == 3 for r in ga_none)


class TestAnalyze:
    def test_lognormal(self, small_instance, tmp_path):
        harness.eval_bench(small_instance, 30, out_dir=tmp_path, track_memory=False)
        rows = harness.analyze("lognormal", [tmp_path / "eval_bench.csv"], tmp_path)
        assert [r["metric"] for r in rows] == list(harness.EVAL_METRICS)
        assert (tmp_path / "analysis_lognormal.csv").exists()

    def test_kruskal_and_mape(self, tmp_path):
        rows = [{"experiment": "t", "size": s, "rep": r, "mape": 10.0 * s + r,
                 "zero_ratio_hidden1": 50, "zero_ratio_hidden2": 40}
                for s in (1, 2, 3) for r in range(6)]
        path = harness.write_csv(tmp_path / "q.csv", rows, harness.QUALITY_COLUMNS)
        head = harness.analyze("kruskal", [path], tmp_path, group="size", value="mape")[0]
        assert head["k"] == 3 and head["p_value"] < 0.01
        post = harness.read_csv(tmp_path / "analysis_posthoc.csv")
        assert {(p["lower"], p["higher"]) for p in post if p["significant"] == "True"} == {
            ("1", "2"), ("1", "3"), ("2", "3")}
        mape = harness.analyze("mape", [path])
        assert [m["size"] for m in mape] == [1, 2, 3]
        assert mape[0]["mape_median"] == pytest.approx(12.5)

    def test_break_even_constants(self):
        row = harness.analyze("break-even", [], constants=(217.79, 3.46, 2574.66, 2.64))[0]
        assert row["n_breakeven"] == pytest.approx(2874, abs=1)

    def test_break_even_from_files(self, tmp_path):
        train = [{"size": 128, "total_j": 10.0}, {"size": 2048, "total_j": 110.0}]
        use = [{"size": 128, "total_j": 3.0}, {"size": 2048, "total_j": 1.0}]
        t = harness.write_csv(tmp_path / "t.csv", train, ("size", "total_j"))
        u = harness.write_csv(tmp_path / "u.csv", use, ("size", "total_j"))
        assert harness.analyze("break-even", [t, u])[0]["n_breakeven"] == pytest.approx(50.0)

    def test_cost_model(self, tmp_path):
        rows = [{"n_p": p, "n_t": t, "total_j": 0.5 * t * t + 2.0} for p in (63, 400, 900) for t in (128, 256, 512)]
        path = harness.write_csv(tmp_path / "c.csv", rows, ("n_p", "n_t", "total_j"))
        out = {(r["model"], r["term"]): r["coefficient"] for r in harness.analyze("cost-model", [path])}
        assert out[("reduced", "a2")] == pytest.approx(0.5)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown analysis"):
            harness.analyze("regression", [])
