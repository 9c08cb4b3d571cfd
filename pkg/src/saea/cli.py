"""Command-line entry point: ``saea <command> [options]``.

Exit codes: 0 success, 2 configuration or input error, 3 energy backend
unavailable (only when ``--require-rapl`` forbids the proxy fallback).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from . import harness, optim, traffic
from . import surrogate as sg
from .profile import BackendUnavailable

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3

# run-config keys as they appear in configuration files
CONFIG_KEYS = {
    "phi1", "phi2", "lambda", "w_max", "w_min", "p_c", "p_m", "eta_m",
    "N", "max_fe", "n_t", "n_r", "strategy", "seed",
    "algorithms", "strategies", "runs", "epochs", "learning_rate", "audit_per_generation",
}


class ConfigError(ValueError):
    pass


def _grid(text: str) -> tuple[int, int]:
    try:
        r, c = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 2x3, got {text!r}") from None
    return r, c


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="saea", description="Energy profiling of surrogate-assisted optimizers.")
    p.add_argument("--seed", type=int, default=0, help="base random seed")
    p.add_argument("--out-dir", default="results", help="directory for CSV outputs")
    p.add_argument("--proxy-energy", action="store_true", help="use wall time x wattage instead of RAPL")
    p.add_argument("--require-rapl", action="store_true", help="fail with exit 3 when RAPL is unreadable")
    p.add_argument("--cpu-watts", type=float, default=50.0, help="proxy CPU wattage")
    p.add_argument("--dram-watts", type=float, default=5.0, help="proxy DRAM wattage")
    p.add_argument("--format-version", type=int, default=harness.SCHEMA_VERSION,
                   help="expected instance/results format version")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-instance", help="generate a synthetic grid instance")
    g.add_argument("--grid", type=_grid, default=(2, 2))
    g.add_argument("--vehicles", type=int, default=60)
    g.add_argument("--t-s", type=int, default=400, help="simulation time in ticks")
    g.add_argument("--phases", type=int, default=None, help="phases per intersection (default: random 2-4)")
    g.add_argument("--capacity", type=int, default=6)
    g.add_argument("--bounds", type=int, nargs=2, default=list(traffic.DEFAULT_BOUNDS), metavar=("LO", "HI"))
    g.add_argument("--name", default=None)
    g.add_argument("--output", default=None, help="instance file (default: OUT_DIR/instance.json)")

    e = sub.add_parser("eval-bench", help="profile random solution evaluations")
    e.add_argument("--instance", required=True)
    e.add_argument("--n", type=int, default=harness.DEFAULT_EVALS)
    e.add_argument("--no-memory", action="store_true", help="skip allocation tracking")

    t = sub.add_parser("train-bench", help="profile surrogate training and use over dataset sizes")
    t.add_argument("--archive", required=True, help="eval-bench CSV with solution and F columns")
    t.add_argument("--sizes", type=_int_list, default=list(harness.DEFAULT_GRID))
    t.add_argument("--reps", type=int, default=harness.DEFAULT_REPETITIONS)
    t.add_argument("--test-size", type=int, default=harness.TEST_SIZE)
    t.add_argument("--epochs", type=int, default=sg.TrainConfig.epochs)
    t.add_argument("--learning-rate", type=float, default=sg.TrainConfig.learning_rate)
    t.add_argument("--save-nets", action="store_true")
    t.add_argument("--no-memory", action="store_true")

    r = sub.add_parser("run", help="run optimizer variants")
    r.add_argument("--instance", required=True)
    r.add_argument("--config", default=None, help="YAML or JSON run configuration")
    r.add_argument("--algorithms", type=_str_list, default=None)
    r.add_argument("--strategies", type=_str_list, default=None)
    r.add_argument("--n-t", type=_int_list, default=None)
    r.add_argument("--runs", type=int, default=None)
    r.add_argument("--max-fe", type=int, default=None)
    r.add_argument("--population", type=int, default=None)
    r.add_argument("--no-memory", action="store_true")

    a = sub.add_parser("analyze", help="statistics over result CSVs")
    a.add_argument("kind", choices=harness.ANALYSES)
    a.add_argument("inputs", nargs="*")
    a.add_argument("--group", default="size")
    a.add_argument("--value", default="mape")
    a.add_argument("--alpha", type=float, default=0.01)
    a.add_argument("--constants", type=float, nargs=4, default=None,
                   metavar=("TRAIN_SMALL", "USE_SMALL", "TRAIN_LARGE", "USE_LARGE"))
    a.add_argument("--small", type=int, default=None)
    a.add_argument("--large", type=int, default=None)
    a.add_argument("--target", default="total_j")

    s = sub.add_parser("sparsity", help="activation sparsity and weight histograms of saved networks")
    s.add_argument("nets", nargs="+")
    s.add_argument("--probes", required=True, help="eval-bench CSV whose solutions serve as probes")
    s.add_argument("--n-probes", type=int, default=harness.TEST_SIZE)
    return p


def load_run_config(path) -> dict:
    """Read a YAML or JSON mapping and reject unknown keys."""
    text = Path(path).read_text()
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: configuration must be a mapping")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
    return data


def _run_settings(args, cfg: dict) -> dict:
    def pick(arg, key, default):
        return arg if arg is not None else cfg.get(key, default)

    pso = optim.PsoParams(
        phi1=cfg.get("phi1", 2.05), phi2=cfg.get("phi2", 2.05), lam=cfg.get("lambda", 0.5),
        w_max=cfg.get("w_max", 0.5), w_min=cfg.get("w_min", 0.1),
    )
    ga = optim.GaParams(
        crossover_rate=cfg.get("p_c", 1.0), mutation_rate=cfg.get("p_m"),
        distribution_index=cfg.get("eta_m", 20.0),
    )
    base = optim.RunConfig(
        population_size=pick(args.population, "N", 100), max_fe=pick(args.max_fe, "max_fe", 30000),
        n_r=cfg.get("n_r", 10),
    )
    n_t = args.n_t if args.n_t is not None else cfg.get("n_t", list(harness.N_T_SETTINGS))
    strategies = pick(args.strategies, "strategies", [cfg["strategy"]] if "strategy" in cfg else list(optim.STRATEGIES))
    algorithms = pick(args.algorithms, "algorithms", list(optim.ALGORITHMS))
    for a in algorithms:
        if a not in optim.ALGORITHMS:
            raise ConfigError(f"unknown algorithm {a!r}")
    for s in strategies:
        if s not in optim.STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r}")
    train_cfg = sg.TrainConfig(epochs=cfg.get("epochs", 100), learning_rate=cfg.get("learning_rate", 1e-4))
    return dict(
        algorithms=algorithms, strategies=strategies,
        n_ts=n_t if isinstance(n_t, list) else [n_t],
        runs=pick(args.runs, "runs", harness.DEFAULT_RUNS), seed=cfg.get("seed", args.seed),
        base=base, pso_params=pso, ga_params=ga, train_cfg=train_cfg,
        audit_per_generation=cfg.get("audit_per_generation", 10),
    )


def _load_instance(path, version):
    inst = traffic.load_instance(path)
    if version != traffic.FORMAT_VERSION:
        raise ConfigError(f"format version {version} is not supported (this build reads {traffic.FORMAT_VERSION})")
    return inst


def dispatch(args) -> None:
    out = Path(args.out_dir)
    meter = harness.MeterSettings(
        force_proxy=True if args.proxy_energy else (False if args.require_rapl else None),
        cpu_watts=args.cpu_watts, dram_watts=args.dram_watts, allow_proxy=not args.require_rapl,
    )
    if args.format_version != harness.SCHEMA_VERSION:
        raise ConfigError(f"format version {args.format_version} is not supported")
    if args.command != "gen-instance" and args.command != "analyze":
        meter.meter()  # surface a missing backend before any work

    if args.command == "gen-instance":
        inst = traffic.generate_instance(
            args.seed, args.grid, args.vehicles, args.t_s, phases=args.phases,
            capacity=args.capacity, duration_bounds=tuple(args.bounds), name=args.name,
        )
        path = Path(args.output) if args.output else out / "instance.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        traffic.save_instance(inst, path)
        print(f"wrote {path} (D={inst.dimension}, vehicles={inst.n_vehicles})")
    elif args.command == "eval-bench":
        inst = _load_instance(args.instance, args.format_version)
        res = harness.eval_bench(inst, args.n, args.seed, meter=meter,
                                 track_memory=not args.no_memory, out_dir=out)
        for row in res.summary:
            print(f"{row['metric']:>13}  E={row['E']}  SD={row['SD']}  nmse={row['nmse']}")
    elif args.command == "train-bench":
        X, y = harness.load_archive(args.archive)
        harness.train_bench(
            X, y, args.sizes, args.reps, args.seed, meter=meter, test_size=args.test_size,
            train_cfg=sg.TrainConfig(epochs=args.epochs, learning_rate=args.learning_rate),
            track_memory=not args.no_memory, out_dir=out, save_nets=args.save_nets,
        )
        for row in harness.analyze_mape(out / "train_bench_quality.csv"):
            print(f"size {row['size']:>5}  mape {row['mape_mean']:.2f} +- {row['mape_std']:.2f}")
    elif args.command == "run":
        inst = _load_instance(args.instance, args.format_version)
        cfg = load_run_config(args.config) if args.config else {}
        res = harness.run_experiment(inst, meter=meter, track_memory=not args.no_memory,
                                     out_dir=out, **_run_settings(args, cfg))
        for row in res.summary:
            print(f"{row['algorithm']:>3} {row['strategy']:>8} n_t={row['n_t']!s:>5} seed={row['seed']}"
                  f"  best_F={row['best_F']:.4f}  true_evals={row['true_evaluations']}")
    elif args.command == "analyze":
        rows = harness.analyze(args.kind, args.inputs, out, group=args.group, value=args.value,
                               alpha=args.alpha, constants=args.constants, small=args.small,
                               large=args.large, target=args.target)
        for row in rows:
            print(json.dumps(row, default=float))
    elif args.command == "sparsity":
        X, _ = harness.load_archive(args.probes)
        summary, _ = harness.sparsity_report(args.nets, X[: args.n_probes].astype(float), out)
        for row in summary:
            print(f"{row['net']}: hidden1 {row['zero_ratio_hidden1']:.1f}%  hidden2 {row['zero_ratio_hidden2']:.1f}%")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        dispatch(args)
    except BackendUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ValueError, KeyError, OSError, yaml.YAMLError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
