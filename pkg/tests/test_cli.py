import json

import pytest

from saea import cli, harness, traffic


@pytest.fixture
def instance_file(tmp_path):
    assert cli.main(["--out-dir", str(tmp_path), "--seed", "4", "gen-instance",
                     "--vehicles", "20", "--t-s", "150"]) == 0
    return tmp_path / "instance.json"


def test_gen_instance(instance_file):
    inst = traffic.load_instance(instance_file)
    assert inst.n_vehicles == 20 and inst.simulation_time == 150


def test_gen_instance_deterministic(tmp_path, instance_file):
    other = tmp_path / "again.json"
    cli.main(["--seed", "4", "gen-instance", "--vehicles", "20", "--t-s", "150", "--output", str(other)])
    assert other.read_text() == instance_file.read_text()


def test_pipeline(tmp_path, instance_file, capsys):
    out = str(tmp_path)
    assert cli.main(["--out-dir", out, "eval-bench", "--instance", str(instance_file), "--n", "80"]) == 0
    assert cli.main(["--out-dir", out, "train-bench", "--archive", str(tmp_path / "eval_bench.csv"),
                     "--sizes", "16,32", "--reps", "2", "--test-size", "20", "--epochs", "2",
                     "--save-nets", "--no-memory"]) == 0
    assert cli.main(["--out-dir", out, "sparsity", str(tmp_path / "nets" / "net_32_0.npz"),
                     "--probes", str(tmp_path / "eval_bench.csv"), "--n-probes", "10"]) == 0
    assert cli.main(["--out-dir", out, "analyze", "mape", str(tmp_path / "train_bench_quality.csv")]) == 0
    lines = [json.loads(s) for s in capsys.readouterr().out.splitlines() if s.startswith("{")]
    assert [r["size"] for r in lines] == [16, 32]


def test_run_with_config(tmp_path, instance_file):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("N: 10\nmax_fe: 40\nn_t: [15]\nruns: 1\nepochs: 2\nalgorithms: [pso]\nstrategy: pretrain\n")
    assert cli.main(["--out-dir", str(tmp_path), "run", "--instance", str(instance_file),
                     "--config", str(cfg), "--no-memory"]) == 0
    rows = harness.read_csv(tmp_path / "run_summary.csv")
    assert [(r["strategy"], r["true_evaluations"]) for r in rows] == [("pretrain", "16")]


def test_json_config(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"phi1": 1.5, "lambda": 0.3, "strategy": "retrain"}))
    assert cli.load_run_config(cfg) == {"phi1": 1.5, "lambda": 0.3, "strategy": "retrain"}


@pytest.mark.parametrize("argv", [
    ["nosuch"],
    ["--format-version", "9", "gen-instance"],
    ["analyze", "break-even", "--constants", "1", "2", "5", "2"],
    ["eval-bench", "--instance", "/nonexistent/instance.json"],
])
def test_config_errors_exit_2(argv):
    assert cli.main(argv) == cli.EXIT_CONFIG


def test_unknown_config_key(tmp_path, instance_file):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("swarm_size: 3\n")
    assert cli.main(["run", "--instance", str(instance_file), "--config", str(cfg)]) == 2


def test_bad_strategy(tmp_path, instance_file):
    assert cli.main(["--out-dir", str(tmp_path), "run", "--instance", str(instance_file),
                     "--strategies", "sometimes"]) == 2


def test_missing_backend_exit_3(instance_file, monkeypatch):
    monkeypatch.setattr("saea.profile.discover_rapl", lambda root: [])
    assert cli.main(["--require-rapl", "eval-bench", "--instance", str(instance_file)]) == cli.EXIT_BACKEND


def test_help_exits_0():
    assert cli.main(["--help"]) == 0
