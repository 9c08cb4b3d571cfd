"""Experiment drivers: evaluation cost, surrogate training/use, full runs, analysis.

Every CSV written here starts with a ``schema_version`` column and names all
of its fields, so files can be read back by column name alone. Experiments
run sequentially in the calling process to keep energy attribution clean.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import optim, profile, stats, traffic
from . import surrogate as sg
from .profile import EnergyMeter, Profiler

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_GRID = (128, 256, 512, 1024, 2048, 4096, 8192)
DEFAULT_EVALS = 2000
DEFAULT_REPETITIONS = 10
DEFAULT_RUNS = 5
TEST_SIZE = 100
N_T_SETTINGS = (100, 8192)  # small and large pre-training archive sizes
EXPERIMENT_KINDS = ("gen-instance", "eval-bench", "train-bench", "run", "analyze", "sparsity")
ENERGY_FIELDS = ("cpu_j", "dram_j", "total_j", "wall_s", "peak_alloc_b", "source")


class SchemaError(ValueError):
    """A results file is missing a column or carries an unknown schema version."""


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class MeterSettings:
    force_proxy: bool | None = None
    cpu_watts: float = 50.0
    dram_watts: float = 5.0
    allow_proxy: bool = True

    def meter(self) -> EnergyMeter:
        return EnergyMeter(self.force_proxy, self.cpu_watts, self.dram_watts, self.allow_proxy)


@dataclass
class ExperimentSpec:
    kind: str
    instance_path: str | None = None
    repetitions: int = 1
    seeds: tuple[int, ...] = (0,)
    out_dir: str = "results"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        grid = self.params.get("grid")
        if grid is not None and any(int(n) < 1 for n in grid):
            raise ValueError("dataset sizes must be positive")


# ---------------------------------------------------------------------------
# CSV helpers

def write_csv(path, rows: Sequence[dict], columns: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["schema_version", *columns], extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({"schema_version": SCHEMA_VERSION, **row})
    return path


def read_csv(path, required: Iterable[str] = ()) -> list[dict]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        columns = reader.fieldnames or []
        if "schema_version" not in columns:
            raise SchemaError(f"{path}: missing column 'schema_version'")
        missing = [c for c in required if c not in columns]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = list(reader)
    for row in rows:
        if row["schema_version"] != str(SCHEMA_VERSION):
            raise SchemaError(f"{path}: unsupported schema_version {row['schema_version']!r}")
    return rows


def _solution_str(x) -> str:
    return " ".join(str(int(v)) for v in x)


def _parse_solution(s: str) -> np.ndarray:
    return np.array([int(v) for v in s.split()], dtype=np.int64)


def _energy_cells(p: profile.ComponentProfile) -> dict:
    row = p.as_row()
    return {k: row[k] for k in ENERGY_FIELDS}


def _median_low(values):
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


# ---------------------------------------------------------------------------
# evaluation characterization

EVAL_COLUMNS = ("experiment", "instance", "seed", "index", "solution", "F", *ENERGY_FIELDS)
SUMMARY_COLUMNS = ("experiment", "instance", "metric", "E", "SD", "mu", "sigma", "nmse", "n")
EVAL_METRICS = ("cpu_j", "dram_j", "total_j", "wall_s", "peak_alloc_b")


@dataclass
class EvalBenchResult:
    rows: list[dict]
    summary: list[dict]
    X: np.ndarray
    y: np.ndarray


def lognormal_summary(rows: Sequence[dict], experiment: str, instance: str) -> list[dict]:
    """One fit per metric; metrics with absent or nonpositive values get NA."""
    out = []
    for metric in EVAL_METRICS:
        vals = [r[metric] for r in rows]
        base = {"experiment": experiment, "instance": instance, "metric": metric, "n": len(vals)}
        try:
            arr = np.asarray(vals, dtype=float)
            fit = stats.fit_lognormal(arr)
        except ValueError:
            out.append({**base, **{k: "NA" for k in ("E", "SD", "mu", "sigma", "nmse")}})
            continue
        out.append({**base, "E": fit.mean_E, "SD": fit.sd_SD, "mu": fit.mu, "sigma": fit.sigma, "nmse": fit.nmse})
    return out


def eval_bench(
    instance: traffic.TrafficInstance,
    n: int = DEFAULT_EVALS,
    seed: int = 0,
    *,
    meter: MeterSettings = MeterSettings(),
    track_memory: bool = True,
    out_dir=None,
) -> EvalBenchResult:
    """Profile ``n`` seeded random solutions one evaluation at a time."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    prof = Profiler(meter.meter(), track_memory=track_memory)
    rows, X, y = [], [], []
    for i in range(n):
        x = traffic.random_solution(instance, rng)
        with prof.measure("Evaluation") as m:
            f = traffic.objective(instance, x)
        rows.append({
            "experiment": "eval-bench", "instance": instance.name, "seed": seed, "index": i,
            "solution": _solution_str(x), "F": f, **_energy_cells(m["profile"]),
        })
        X.append(x)
        y.append(f)
    prof.finish()
    summary = lognormal_summary(rows, "eval-bench", instance.name)
    if out_dir is not None:
        write_csv(Path(out_dir) / "eval_bench.csv", rows, EVAL_COLUMNS)
        write_csv(Path(out_dir) / "eval_summary.csv", summary, SUMMARY_COLUMNS)
    return EvalBenchResult(rows, summary, np.array(X, dtype=np.int64), np.array(y))


def load_archive(path) -> tuple[np.ndarray, np.ndarray]:
    rows = read_csv(path, ("solution", "F"))
    X = np.array([_parse_solution(r["solution"]) for r in rows], dtype=np.int64)
    y = np.array([float(r["F"]) for r in rows])
    return X, y


# ---------------------------------------------------------------------------
# surrogate training and use

TRAINING_COLUMNS = ("experiment", "size", "rep", "n_p", "n_t", "final_loss", *ENERGY_FIELDS)
USE_COLUMNS = ("experiment", "size", "rep", "test_index", "actual", "predicted", *ENERGY_FIELDS)
QUALITY_COLUMNS = ("experiment", "size", "rep", "mape", "zero_ratio_hidden1", "zero_ratio_hidden2")


@dataclass
class TrainBenchResult:
    training: list[dict]
    use: list[dict]
    quality: list[dict]
    splits: dict  # (size, rep) -> (train indices, test indices)


def split_indices(n_archive: int, size: int, rep: int, seed: int, test_size: int = TEST_SIZE):
    """Seeded permutation per repetition: a fixed test block, then nested training prefixes."""
    perm = np.random.default_rng(np.random.SeedSequence([seed, rep])).permutation(n_archive)
    return perm[test_size:test_size + size], perm[:test_size]


def train_bench(
    X: np.ndarray,
    y: np.ndarray,
    grid: Sequence[int] = DEFAULT_GRID,
    repetitions: int = DEFAULT_REPETITIONS,
    seed: int = 0,
    *,
    train_cfg: sg.TrainConfig = sg.TrainConfig(),
    test_size: int = TEST_SIZE,
    meter: MeterSettings = MeterSettings(),
    track_memory: bool = True,
    out_dir=None,
    save_nets: bool = False,
) -> TrainBenchResult:
    """Train one network per (size, repetition) and profile its use on held-out points."""
    X = np.asarray(X)
    y = np.asarray(y, dtype=float)
    grid = [int(s) for s in grid]
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    feasible = [s for s in grid if s + test_size <= len(X)]
    if len(feasible) < len(grid):
        raise ValueError(
            f"archive of {len(X)} solutions is too small for sizes "
            f"{[s for s in grid if s not in feasible]} with a {test_size}-point test set; "
            f"feasible sizes: {feasible}"
        )
    d = X.shape[1]
    n_p = sg.param_count(sg.NetSpec.for_dimension(d))
    training, use, quality, splits = [], [], [], {}
    for rep in range(repetitions):
        for size in grid:
            tr, te = split_indices(len(X), size, rep, seed, test_size)
            splits[(size, rep)] = (tr, te)
            prof = Profiler(meter.meter(), track_memory=track_memory)
            net = sg.build(sg.NetSpec.for_dimension(d, seed=seed + rep))
            with prof.measure("Training") as m:
                rep_ = sg.train(net, (X[tr].astype(float), y[tr]), train_cfg, rng_seed=seed + rep)
            training.append({
                "experiment": "train-bench", "size": size, "rep": rep, "n_p": n_p, "n_t": size,
                "final_loss": rep_.final_loss, **_energy_cells(m["profile"]),
            })
            preds = []
            for k in te:
                with prof.measure("Use") as m:
                    p = sg.predict(net, X[k])
                preds.append(p)
                use.append({
                    "experiment": "train-bench", "size": size, "rep": rep, "test_index": int(k),
                    "actual": float(y[k]), "predicted": p, **_energy_cells(m["profile"]),
                })
            prof.finish()
            sp = sg.sparsity(net, X[te])
            quality.append({
                "experiment": "train-bench", "size": size, "rep": rep,
                "mape": stats.mape(y[te], preds),
                "zero_ratio_hidden1": sp.zero_ratio_hidden1,
                "zero_ratio_hidden2": sp.zero_ratio_hidden2,
            })
            if save_nets and out_dir is not None:
                ckpt = Path(out_dir) / "nets"
                ckpt.mkdir(parents=True, exist_ok=True)
                sg.save(net, ckpt / f"net_{size}_{rep}.npz")
    if out_dir is not None:
        write_csv(Path(out_dir) / "train_bench_training.csv", training, TRAINING_COLUMNS)
        write_csv(Path(out_dir) / "train_bench_use.csv", use, USE_COLUMNS)
        write_csv(Path(out_dir) / "train_bench_quality.csv", quality, QUALITY_COLUMNS)
    return TrainBenchResult(training, use, quality, splits)


HIST_COLUMNS = ("experiment", "layer", "bin", "left", "right", "count")
SPARSITY_COLUMNS = ("experiment", "net", "n_probes", "zero_ratio_hidden1", "zero_ratio_hidden2")


def sparsity_report(net_paths: Sequence, probes: np.ndarray, out_dir=None) -> tuple[list[dict], list[dict]]:
    """Zero-output ratios and weight histograms for saved networks."""
    summary, hist_rows = [], []
    for path in net_paths:
        net = sg.load(path)
        rep = sg.sparsity(net, probes)
        name = Path(path).name
        summary.append({
            "experiment": "sparsity", "net": name, "n_probes": len(probes),
            "zero_ratio_hidden1": rep.zero_ratio_hidden1, "zero_ratio_hidden2": rep.zero_ratio_hidden2,
        })
        for layer, (counts, edges) in rep.histograms.items():
            for b, c in enumerate(counts):
                hist_rows.append({
                    "experiment": "sparsity", "layer": f"{name}:{layer}", "bin": b,
                    "left": edges[b], "right": edges[b + 1], "count": int(c),
                })
    if out_dir is not None:
        write_csv(Path(out_dir) / "sparsity.csv", summary, SPARSITY_COLUMNS)
        write_csv(Path(out_dir) / "sparsity_histograms.csv", hist_rows, HIST_COLUMNS)
    return summary, hist_rows


# ---------------------------------------------------------------------------
# optimization runs

RUN_KEY = ("algorithm", "strategy", "n_t", "seed")
PROFILE_COLUMNS = (*RUN_KEY, *profile.CSV_COLUMNS)
FE_COLUMNS = (*RUN_KEY, "fe_index", "true_best_F", "cumulative_j")
GEN_COLUMNS = (*RUN_KEY, "generation", "predicted_best", "surrogate_active")
RUN_SUMMARY_COLUMNS = (
    *RUN_KEY, "max_fe", "population_size", "true_evaluations", "surrogate_evaluations",
    "trainings", "surrogate_generations", "best_F", "best_solution",
)
AUDIT_COLUMNS = (*RUN_KEY, "generation", "n_audited", "mape")
REPORT_COLUMNS = ("algorithm", "strategy", "n_t", "component", "measure", "mean", "std", "n")


@dataclass
class RunResult:
    traces: list[optim.RunTrace]
    summary: list[dict]
    profiles: list[dict]
    report: list[dict]
    audit: list[dict]


def _run_variants(algorithms, strategies, n_ts):
    for algo in algorithms:
        for strategy in strategies:
            if strategy == "none":
                yield algo, strategy, None
            else:
                for n_t in n_ts:
                    yield algo, strategy, int(n_t)


def _profile_rows(key: dict, profiles: dict) -> list[dict]:
    rows = []
    total = profile.total_profile(profiles)
    for comp in (*profile.COMPONENTS, "Total"):
        p = total if comp == "Total" else profiles[comp]
        row = p.as_row()
        if comp != "Total" and p.call_count == 0:
            row = {k: ("NA" if k not in ("component", "source") else v) for k, v in row.items()}
        rows.append({**key, **row})
    return rows


def audit_predictions(trace: optim.RunTrace, problem: optim.Problem, per_generation: int, seed: int) -> list[dict]:
    """Re-evaluate logged predictions with the true objective, grouped by generation."""
    by_gen: dict[int, list] = {}
    for gen, _, x, pred in trace.predictions:
        by_gen.setdefault(gen, []).append((x, pred))
    rng = np.random.default_rng(seed)
    rows = []
    for gen in sorted(by_gen):
        items = by_gen[gen]
        if per_generation and len(items) > per_generation:
            pick = np.sort(rng.choice(len(items), size=per_generation, replace=False))
            items = [items[i] for i in pick]
        actual = [problem.objective(x) for x, _ in items]
        rows.append({"generation": gen, "n_audited": len(items), "mape": stats.mape(actual, [p for _, p in items])})
    return rows


def run_experiment(
    instance: traffic.TrafficInstance,
    *,
    algorithms: Sequence[str] = optim.ALGORITHMS,
    strategies: Sequence[str] = optim.STRATEGIES,
    n_ts: Sequence[int] = N_T_SETTINGS,
    runs: int = DEFAULT_RUNS,
    seed: int = 0,
    base: optim.RunConfig = optim.RunConfig(max_fe=2000),
    pso_params: optim.PsoParams = optim.PsoParams(),
    ga_params: optim.GaParams = optim.GaParams(),
    train_cfg: sg.TrainConfig = sg.TrainConfig(),
    meter: MeterSettings = MeterSettings(),
    track_memory: bool = True,
    audit_per_generation: int = 10,
    out_dir=None,
) -> RunResult:
    """Run every requested (algorithm, strategy, n_t) variant ``runs`` times.

    Seeds are ``seed, seed + 1, ...``. For each surrogate variant the run with
    the lower-median final best F gets a per-generation MAPE audit.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    problem = optim.Problem.from_instance(instance)
    traces, summary, prof_rows, report_rows, fe_rows, gen_rows, audit_rows = [], [], [], [], [], [], []
    for algo, strategy, n_t in _run_variants(algorithms, strategies, n_ts):
        variant_traces = []
        for k in range(runs):
            cfg = optim.RunConfig(
                population_size=base.population_size, max_fe=base.max_fe,
                n_t=n_t if n_t is not None else base.n_t, n_r=base.n_r,
                strategy=strategy, seed=seed + k, audit_predictions=strategy != "none",
            )
            prof = Profiler(meter.meter(), track_memory=track_memory)
            trace = optim.run(problem, algo, cfg, pso_params=pso_params, ga_params=ga_params,
                              train_cfg=train_cfg, profiler=prof)
            key = {"algorithm": algo, "strategy": strategy, "n_t": "NA" if n_t is None else n_t, "seed": cfg.seed}
            traces.append(trace)
            variant_traces.append(trace)
            summary.append({
                **key, "max_fe": cfg.max_fe, "population_size": cfg.population_size,
                "true_evaluations": trace.true_evaluations,
                "surrogate_evaluations": trace.surrogate_evaluations,
                "trainings": trace.trainings, "surrogate_generations": trace.surrogate_generations,
                "best_F": trace.best_f, "best_solution": _solution_str(trace.best_x),
            })
            prof_rows.extend(_profile_rows(key, trace.profiles))
            fe_rows.extend({**key, "fe_index": i, "true_best_F": b, "cumulative_j": e} for i, b, e in trace.fe_log)
            gen_rows.extend(
                {**key, "generation": g, "predicted_best": b, "surrogate_active": int(a)}
                for g, b, a in trace.generation_log
            )
        label = {"algorithm": algo, "strategy": strategy, "n_t": "NA" if n_t is None else n_t}
        report_rows.extend({**label, **r} for r in profile.report([t.profiles for t in variant_traces]))
        if strategy != "none":
            target = _median_low([t.best_f for t in variant_traces])
            chosen = next(t for t in variant_traces if t.best_f == target)
            key = {**label, "seed": chosen.seed}
            audit_rows.extend(
                {**key, **r} for r in audit_predictions(chosen, problem, audit_per_generation, chosen.seed)
            )
        # predictions are only needed for the audit
        for t in variant_traces:
            t.predictions.clear()
    if out_dir is not None:
        out = Path(out_dir)
        write_csv(out / "run_summary.csv", summary, RUN_SUMMARY_COLUMNS)
        write_csv(out / "run_profiles.csv", prof_rows, PROFILE_COLUMNS)
        write_csv(out / "run_report.csv", report_rows, REPORT_COLUMNS)
        write_csv(out / "run_fe_trace.csv", fe_rows, FE_COLUMNS)
        write_csv(out / "run_generations.csv", gen_rows, GEN_COLUMNS)
        write_csv(out / "run_mape_audit.csv", audit_rows, AUDIT_COLUMNS)
    return RunResult(traces, summary, prof_rows, report_rows, audit_rows)


# ---------------------------------------------------------------------------
# analysis

ANALYSES = ("lognormal", "kruskal", "mape", "break-even", "cost-model", "profile")


def _floats(rows, column):
    return [float(r[column]) for r in rows if r[column] not in ("", "NA")]


def analyze_lognormal(path) -> list[dict]:
    rows = read_csv(path, EVAL_METRICS)
    inst = rows[0].get("instance", "") if rows else ""
    parsed = [{m: (float(r[m]) if r[m] not in ("", "NA") else None) for m in EVAL_METRICS} for r in rows]
    return lognormal_summary(parsed, "analyze", inst)


def analyze_kruskal(path, group: str, value: str, alpha: float = 0.01) -> tuple[dict, list[dict]]:
    """Kruskal-Wallis over groups of ``value`` keyed by ``group``, plus the post-hoc matrix."""
    rows = read_csv(path, (group, value))
    groups: dict[str, list[float]] = {}
    for r in rows:
        if r[value] not in ("", "NA"):
            groups.setdefault(r[group], []).append(float(r[value]))
    labels = sorted(groups, key=lambda g: (float(g) if _is_number(g) else math.inf, g))
    res = stats.kruskal_wallis([groups[g] for g in labels])
    matrix = stats.pairwise_posthoc([groups[g] for g in labels], alpha)
    head = {"test": "kruskal-wallis", "group": group, "value": value, "k": len(labels),
            "H": float(res.H), "df": res.df, "p_value": res.p_value}
    cells = [
        {"lower": a, "higher": b, "significant": bool(matrix[i, j])}
        for i, a in enumerate(labels) for j, b in enumerate(labels) if i != j
    ]
    return head, cells


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def analyze_mape(path) -> list[dict]:
    rows = read_csv(path, ("size", "mape", "zero_ratio_hidden1", "zero_ratio_hidden2"))
    sizes = sorted({int(r["size"]) for r in rows})
    out = []
    for s in sizes:
        sub = [r for r in rows if int(r["size"]) == s]
        m = np.array(_floats(sub, "mape"))
        z1 = np.array(_floats(sub, "zero_ratio_hidden1"))
        z2 = np.array(_floats(sub, "zero_ratio_hidden2"))
        out.append({
            "size": s, "reps": len(sub), "mape_mean": float(m.mean()),
            "mape_std": float(m.std(ddof=1)) if len(m) > 1 else 0.0, "mape_median": float(np.median(m)),
            "zero_h1_mean": float(z1.mean()), "zero_h2_mean": float(z2.mean()),
        })
    return out


def analyze_break_even(training_path=None, use_path=None, small=None, large=None, constants=None) -> dict:
    """Break-even uses from measured means, or from four given constants."""
    if constants is not None:
        return stats.break_even_report(*constants).__dict__
    train = read_csv(training_path, ("size", "total_j"))
    use = read_csv(use_path, ("size", "total_j"))
    sizes = sorted({int(r["size"]) for r in train})
    small = sizes[0] if small is None else int(small)
    large = sizes[-1] if large is None else int(large)

    def mean_at(rows, s):
        vals = [float(r["total_j"]) for r in rows if int(r["size"]) == s]
        if not vals:
            raise ValueError(f"no rows for dataset size {s}")
        return float(np.mean(vals))

    return stats.break_even_report(
        mean_at(train, small), mean_at(use, small), mean_at(train, large), mean_at(use, large)
    ).__dict__


def analyze_cost_model(paths: Sequence, target: str = "total_j") -> dict:
    points = []
    for p in paths:
        points += [(float(r["n_p"]), float(r["n_t"]), float(r[target]))
                   for r in read_csv(p, ("n_p", "n_t", target))]
    cm = stats.fit_cost_model(points, target)
    return {"full": cm.full, "full_p_values": cm.full_p_values,
            "reduced": cm.reduced, "reduced_p_values": cm.reduced_p_values, "target": target}


def analyze_profiles(path) -> list[dict]:
    rows = read_csv(path, PROFILE_COLUMNS)
    runs: dict[tuple, dict] = {}
    for r in rows:
        if r["component"] == "Total":
            continue
        key = (r["algorithm"], r["strategy"], r["n_t"])
        run = runs.setdefault(key, {}).setdefault(r["seed"], {})

        def num(v, cast=float):
            return cast(0) if v in ("NA",) else cast(float(v))

        run[r["component"]] = profile.ComponentProfile(
            r["component"], num(r["cpu_j"]), None if r["dram_j"] == "" else num(r["dram_j"]),
            num(r["wall_s"]), num(r["peak_alloc_b"], int), num(r["call_count"], int), r["source"],
        )
    out = []
    for (algo, strategy, n_t), seeds in runs.items():
        for row in profile.report(list(seeds.values())):
            out.append({"algorithm": algo, "strategy": strategy, "n_t": n_t, **row})
    return out


def analyze(kind: str, inputs: Sequence, out_dir=None, **opts):
    """Dispatch one analysis; writes ``analysis_<kind>.csv`` when ``out_dir`` is given."""
    if kind not in ANALYSES:
        raise ValueError(f"unknown analysis {kind!r}; expected one of {ANALYSES}")
    if kind == "lognormal":
        rows = analyze_lognormal(inputs[0])
    elif kind == "kruskal":
        head, cells = analyze_kruskal(inputs[0], opts.get("group", "size"), opts.get("value", "mape"),
                                      opts.get("alpha", 0.01))
        rows = [head]
        if out_dir is not None:
            write_csv(Path(out_dir) / "analysis_posthoc.csv", cells, ("lower", "higher", "significant"))
    elif kind == "mape":
        rows = analyze_mape(inputs[0])
    elif kind == "break-even":
        if opts.get("constants") is not None:
            rows = [analyze_break_even(constants=opts["constants"])]
        else:
            rows = [analyze_break_even(inputs[0], inputs[1], opts.get("small"), opts.get("large"))]
    elif kind == "cost-model":
        res = analyze_cost_model(inputs, opts.get("target", "total_j"))
        rows = [
            {"model": model, "term": term, "coefficient": res[model][term],
             "p_value": res[model + "_p_values"][term], "target": res["target"]}
            for model in ("full", "reduced") for term in res[model]
        ]
    else:
        rows = analyze_profiles(inputs[0])
    if out_dir is not None and rows:
        write_csv(Path(out_dir) / f"analysis_{kind}.csv", rows, list(rows[0]))
    return rows
