"""Integer PSO and GA with optional neural-network surrogate assistance.

Three evaluation strategies share one budget of ``max_fe`` search
evaluations, counting true and surrogate evaluations alike:

``none``
    every evaluation runs the true objective.
``pretrain``
    true evaluations until the archive holds ``n_t`` points, one training,
    then predictions only; the best-predicted solution gets one closing true
    evaluation.
``retrain``
    as ``pretrain``, and after every generation that used predictions the
    ``n_r`` best-predicted new solutions are truly evaluated, archived and
    the surrogate is retrained from scratch on the whole archive.

Re-evaluations and the closing evaluation are audits of the search and sit
outside the ``max_fe`` budget.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import surrogate as sg
from .profile import ComponentProfile, Profiler

log = logging.getLogger(__name__)

STRATEGIES = ("none", "pretrain", "retrain")
ALGORITHMS = ("pso", "ga")


@dataclass(frozen=True)
class PsoParams:
    phi1: float = 2.05
    phi2: float = 2.05
    lam: float = 0.5
    w_max: float = 0.5
    w_min: float = 0.1

    def __post_init__(self):
        if self.phi1 < 0 or self.phi2 < 0:
            raise ValueError("acceleration coefficients must be >= 0")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if not self.w_max >= self.w_min >= 0:
            raise ValueError("need w_max >= w_min >= 0")


@dataclass(frozen=True)
class GaParams:
    crossover_rate: float = 1.0
    mutation_rate: float | None = None  # None means 1/D
    distribution_index: float = 20.0
    tournament_size: int = 2

    def __post_init__(self):
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if not self.distribution_index > 0:
            raise ValueError("distribution_index must be > 0")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")

    def p_m(self, dimension: int) -> float:
        return 1.0 / dimension if self.mutation_rate is None else self.mutation_rate


@dataclass(frozen=True)
class RunConfig:
    population_size: int = 100
    max_fe: int = 30000
    n_t: int = 100
    n_r: int = 10
    strategy: str = "none"
    seed: int = 0
    audit_predictions: bool = False

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.max_fe < 1:
            raise ValueError("max_fe must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.strategy != "none" and self.n_t < self.population_size:
            raise ValueError("n_t must be >= population_size for surrogate strategies")
        if self.n_r < 0 or (self.strategy == "retrain" and self.n_r > self.population_size):
            raise ValueError("n_r must lie in [0, population_size]")

    @property
    def g_total(self) -> float:
        return self.max_fe / self.population_size


@dataclass
class Problem:
    """Box-bounded integer minimization problem."""

    objective: Callable[[np.ndarray], float]
    dimension: int
    lower: int
    upper: int

    @classmethod
    def from_instance(cls, instance) -> "Problem":
        from . import traffic

        return cls(lambda x: traffic.objective(instance, x), instance.dimension, instance.lower, instance.upper)


class Archive:
    """Append-only store of truly evaluated (solution, F) pairs."""

    def __init__(self):
        self.solutions: list[np.ndarray] = []
        self.values: list[float] = []
        self._keys: set[tuple] = set()

    def __len__(self) -> int:
        return len(self.values)

    def append(self, x, f: float) -> None:
        x = np.array(x, dtype=np.int64)
        self.solutions.append(x)
        self.values.append(float(f))
        self._keys.add(tuple(x.tolist()))

    def __contains__(self, x) -> bool:
        return tuple(np.asarray(x).tolist()) in self._keys

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.solutions), np.array(self.values)


@dataclass
class RunTrace:
    algorithm: str
    strategy: str
    seed: int
    # (true evaluation index starting at 1, best true F so far, cumulative joules)
    fe_log: list[tuple[int, float, float]] = field(default_factory=list)
    # (generation, best value under the active regime, surrogate active)
    generation_log: list[tuple[int, float, bool]] = field(default_factory=list)
    # (generation, re-evaluated, duplicates skipped)
    reevaluation_log: list[tuple[int, int, int]] = field(default_factory=list)
    # (generation, search fe index, solution, predicted F) when auditing
    predictions: list[tuple[int, int, np.ndarray, float]] = field(default_factory=list)
    best_x: np.ndarray | None = None
    best_f: float = math.inf
    search_evaluations: int = 0
    true_evaluations: int = 0
    surrogate_evaluations: int = 0
    trainings: int = 0
    surrogate_generations: int = 0
    profiles: dict[str, ComponentProfile] = field(default_factory=dict)
    archive: Archive | None = None

    def best_after(self, k: int) -> float:
        """Best true F among the first ``k`` true evaluations."""
        if k < 1 or not self.fe_log:
            return math.inf
        return self.fe_log[min(k, len(self.fe_log)) - 1][1]


class Evaluator:
    """Evaluation regime: routes solutions to the true objective or the surrogate."""

    def __init__(
        self,
        problem: Problem,
        cfg: RunConfig,
        profiler: Profiler,
        trace: RunTrace,
        train_cfg: sg.TrainConfig | None = None,
    ):
        self.problem = problem
        self.cfg = cfg
        self.profiler = profiler
        self.trace = trace
        self.train_cfg = train_cfg or sg.TrainConfig()
        self.archive = Archive()
        self.fe = 0
        self.generation = 0
        self.net: sg.SurrogateNet | None = None
        self.active = False
        self._best_true = math.inf

    @property
    def budget_left(self) -> int:
        return self.cfg.max_fe - self.fe

    def _true(self, x) -> float:
        with self.profiler.measure("Evaluation"):
            f = float(self.problem.objective(x))
        self.archive.append(x, f)
        t = self.trace
        t.true_evaluations += 1
        if f < self._best_true:
            self._best_true = f
            t.best_x = np.array(x, dtype=np.int64)
            t.best_f = f
        t.fe_log.append((t.true_evaluations, self._best_true, self.profiler.cumulative_joules))
        return f

    def _train(self) -> None:
        X, y = self.archive.arrays()
        k = self.trace.trainings
        seed = int(np.random.SeedSequence([self.cfg.seed, k]).generate_state(1)[0])
        if self.net is None:
            self.net = sg.build(sg.NetSpec.for_dimension(self.problem.dimension, seed=self.cfg.seed))
        try:
            with self.profiler.measure("Training"):
                sg.retrain(self.net, (X.astype(float), y), self.train_cfg, seed)
        except Exception as exc:
            raise RuntimeError(
                f"surrogate training failed (archive size {len(self.archive)}, training #{k + 1}): {exc}"
            ) from exc
        self.trace.trainings += 1

    def evaluate(self, xs: Sequence[np.ndarray]) -> np.ndarray:
        """Evaluate a generation's solutions under the current regime."""
        xs = list(xs)
        if len(xs) > self.budget_left:
            raise ValueError("evaluation request exceeds the remaining budget")
        values = np.empty(len(xs))
        i = 0
        while i < len(xs) and not self.active:
            values[i] = self._true(xs[i])
            self.fe += 1
            i += 1
            if self.cfg.strategy != "none" and len(self.archive) >= self.cfg.n_t:
                self._train()
                self.active = True
        if i < len(xs):
            rest = np.array(xs[i:], dtype=float)
            with self.profiler.measure("Use", calls=len(rest)):
                preds = self.net.predict_batch(rest)
            values[i:] = preds
            if self.cfg.audit_predictions:
                for k, (x, p) in enumerate(zip(xs[i:], preds)):
                    self.trace.predictions.append((self.generation, self.fe + k + 1, np.array(x), float(p)))
            self.fe += len(rest)
            self.trace.surrogate_evaluations += len(rest)
            self.trace.surrogate_generations += 1
            if self.cfg.strategy == "retrain":
                self._reevaluate(xs[i:], preds)
        self.trace.search_evaluations = self.fe
        return values

    def _reevaluate(self, xs, preds) -> None:
        order = np.argsort(preds, kind="stable")
        chosen = []
        seen: set[tuple] = set()
        skipped = 0
        for j in order:
            if len(chosen) == self.cfg.n_r:
                break
            key = tuple(np.asarray(xs[j]).tolist())
            if key in seen or xs[j] in self.archive:
                skipped += 1
                continue
            seen.add(key)
            chosen.append(j)
        if skipped:
            log.info("generation %d: skipped %d duplicate re-evaluation candidates", self.generation, skipped)
        for j in chosen:
            self._true(xs[j])
        self.trace.reevaluation_log.append((self.generation, len(chosen), skipped))
        if chosen:
            self._train()

    def finalize(self, best_x) -> None:
        """Closing true evaluation of the best-predicted solution."""
        if self.trace.surrogate_evaluations > 0:
            self._true(best_x)


# ---------------------------------------------------------------------------
# PSO operators

def pso_velocity_update(v, x, pbest, gbest, w: float, params: PsoParams, rng) -> np.ndarray:
    """Intermediate real velocity ``w v + phi1 U1 (p - x) + phi2 U2 (b - x)``.

    Draw order: ``U1 = rng.random(D)`` then ``U2 = rng.random(D)``.
    """
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    d = v.shape[0]
    u1 = rng.random(d)
    u2 = rng.random(d)
    return w * v + params.phi1 * u1 * (np.asarray(pbest) - x) + params.phi2 * u2 * (np.asarray(gbest) - x)


def stochastic_round(v, lam: float, rng) -> np.ndarray:
    """Floor a component when ``U(0,1) <= lam``, otherwise ceil it."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    v = np.asarray(v, dtype=float)
    u = rng.random(v.shape)
    return np.where(u <= lam, np.floor(v), np.ceil(v)).astype(np.int64)


def inertia(g: float, cfg: RunConfig, params: PsoParams) -> float:
    g_total = cfg.g_total
    if g_total == 0:
        raise ValueError("g_total is zero")
    if not 0 <= g <= g_total:
        raise ValueError(f"generation {g} outside [0, {g_total}]")
    return params.w_max - (params.w_max - params.w_min) * g / g_total


@dataclass
class Swarm:
    x: np.ndarray  # (N, D) integer positions
    v: np.ndarray  # (N, D) integer velocities
    pbest_x: np.ndarray
    pbest_f: np.ndarray
    gbest_x: np.ndarray
    gbest_f: float

    @classmethod
    def from_evaluated(cls, x: np.ndarray, f: np.ndarray) -> "Swarm":
        x = np.array(x, dtype=np.int64)
        f = np.asarray(f, dtype=float)
        b = int(np.argmin(f))
        return cls(x, np.zeros_like(x), x.copy(), f.copy(), x[b].copy(), float(f[b]))


def pso_step(swarm: Swarm, evaluator, cfg: RunConfig, params: PsoParams, rng, *,
             generation: int = 0, lower: int | None = None, upper: int | None = None,
             profiler: Profiler | None = None) -> Swarm:
    """One synchronous swarm generation, updating ``swarm`` in place.

    ``evaluator`` is an :class:`Evaluator` or any callable mapping a list of
    solutions to values. Only as many particles move as the budget allows.
    """
    prof = profiler or getattr(evaluator, "profiler", None) or Profiler(track_memory=False)
    if lower is None:
        lower, upper = evaluator.problem.lower, evaluator.problem.upper
    n = swarm.x.shape[0]
    n_move = min(n, evaluator.budget_left) if isinstance(evaluator, Evaluator) else n
    w = inertia(min(generation, cfg.g_total), cfg, params)
    with prof.measure("Update"):
        for i in range(n_move):
            half = pso_velocity_update(swarm.v[i], swarm.x[i], swarm.pbest_x[i], swarm.gbest_x, w, params, rng)
            swarm.v[i] = stochastic_round(half, params.lam, rng)
            swarm.x[i] = np.clip(swarm.x[i] + swarm.v[i], lower, upper)
    moved = [swarm.x[i].copy() for i in range(n_move)]
    values = evaluator.evaluate(moved) if isinstance(evaluator, Evaluator) else np.asarray(evaluator(moved), dtype=float)
    with prof.measure("Update"):
        for i in range(n_move):
            if values[i] < swarm.pbest_f[i]:
                swarm.pbest_f[i] = values[i]
                swarm.pbest_x[i] = swarm.x[i]
        b = int(np.argmin(swarm.pbest_f))
        if swarm.pbest_f[b] < swarm.gbest_f:
            swarm.gbest_f = float(swarm.pbest_f[b])
            swarm.gbest_x = swarm.pbest_x[b].copy()
    return swarm


# ---------------------------------------------------------------------------
# GA operators

def tournament(values: np.ndarray, size: int, rng) -> int:
    """Index of the best of ``size`` uniform draws; ties keep the first drawn."""
    picks = rng.integers(0, len(values), size=size)
    best = int(picks[0])
    for p in picks[1:]:
        if values[p] < values[best]:
            best = int(p)
    return best


def uniform_crossover(a, b, rate: float, rng) -> tuple[np.ndarray, np.ndarray]:
    c1 = np.array(a, dtype=np.int64)
    c2 = np.array(b, dtype=np.int64)
    if rng.random() < rate:
        swap = rng.random(c1.shape[0]) < 0.5
        c1[swap], c2[swap] = c2[swap], c1[swap].copy()
    return c1, c2


def polynomial_mutation(x, rate: float, eta: float, lower: int, upper: int, rng) -> np.ndarray:
    """Real-coded polynomial mutation, then round to the nearest integer and clamp."""
    y = np.array(x, dtype=np.int64)
    if upper == lower:
        return y
    span = float(upper - lower)
    hit = rng.random(y.shape[0]) < rate
    power = 1.0 / (eta + 1.0)
    for j in np.flatnonzero(hit):
        val = float(y[j])
        d1 = (val - lower) / span
        d2 = (upper - val) / span
        u = rng.random()
        if u < 0.5:
            xy = 1.0 - d1
            t = 2.0 * u + (1.0 - 2.0 * u) * xy ** (eta + 1.0)
            dq = t ** power - 1.0
        else:
            xy = 1.0 - d2
            t = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy ** (eta + 1.0)
            dq = 1.0 - t ** power
        y[j] = min(max(int(np.rint(val + dq * span)), lower), upper)
    return y


@dataclass
class Population:
    x: np.ndarray  # (N, D)
    f: np.ndarray  # (N,)


def ga_step(pop: Population, evaluator, cfg: RunConfig, params: GaParams, rng, *,
            lower: int | None = None, upper: int | None = None,
            profiler: Profiler | None = None) -> Population:
    """One generation: tournament pairs, uniform crossover, mutation, (mu + lambda) survival."""
    prof = profiler or getattr(evaluator, "profiler", None) or Profiler(track_memory=False)
    if lower is None:
        lower, upper = evaluator.problem.lower, evaluator.problem.upper
    n, d = pop.x.shape
    n_off = min(n, evaluator.budget_left) if isinstance(evaluator, Evaluator) else n
    p_m = params.p_m(d)
    with prof.measure("Update"):
        offspring = []
        for _ in range((n_off + 1) // 2):
            i = tournament(pop.f, params.tournament_size, rng)
            j = tournament(pop.f, params.tournament_size, rng)
            c1, c2 = uniform_crossover(pop.x[i], pop.x[j], params.crossover_rate, rng)
            offspring.append(polynomial_mutation(c1, p_m, params.distribution_index, lower, upper, rng))
            offspring.append(polynomial_mutation(c2, p_m, params.distribution_index, lower, upper, rng))
        offspring = offspring[:n_off]
    values = evaluator.evaluate(offspring) if isinstance(evaluator, Evaluator) else np.asarray(evaluator(offspring), dtype=float)
    with prof.measure("Update"):
        if n_off:
            union_x = np.vstack([pop.x, np.array(offspring)])
            union_f = np.concatenate([pop.f, values])
        else:
            union_x, union_f = pop.x, pop.f
        keep = np.argsort(union_f, kind="stable")[:n]
        new = Population(union_x[keep].copy(), union_f[keep].copy())
    return new


# ---------------------------------------------------------------------------
# driver

def run(
    problem,
    algo: str,
    cfg: RunConfig,
    *,
    pso_params: PsoParams | None = None,
    ga_params: GaParams | None = None,
    train_cfg: sg.TrainConfig | None = None,
    profiler: Profiler | None = None,
) -> RunTrace:
    """Execute one optimization run and return its trace.

    ``problem`` is a :class:`Problem` or a traffic instance.
    """
    if algo not in ALGORITHMS:
        raise ValueError(f"algo must be one of {ALGORITHMS}")
    if not isinstance(problem, Problem):
        problem = Problem.from_instance(problem)
    profiler = profiler or Profiler()
    pso_params = pso_params or PsoParams()
    ga_params = ga_params or GaParams()
    rng = np.random.default_rng(cfg.seed)
    trace = RunTrace(algo, cfg.strategy, cfg.seed)
    ev = Evaluator(problem, cfg, profiler, trace, train_cfg)
    n = min(cfg.population_size, cfg.max_fe)

    with profiler.measure("Initialization"):
        x0 = rng.integers(problem.lower, problem.upper + 1, size=(n, problem.dimension))
    f0 = ev.evaluate(list(x0))
    with profiler.measure("Initialization"):
        if algo == "pso":
            state = Swarm.from_evaluated(x0, f0)
        else:
            state = Population(np.array(x0, dtype=np.int64), np.asarray(f0, dtype=float))

    def best_value():
        return state.gbest_f if algo == "pso" else float(state.f.min())

    trace.generation_log.append((0, best_value(), ev.active))
    g = 0
    while ev.budget_left > 0:
        g += 1
        ev.generation = g
        if algo == "pso":
            state = pso_step(state, ev, cfg, pso_params, rng, generation=g - 1)
        else:
            state = ga_step(state, ev, cfg, ga_params, rng)
        trace.generation_log.append((g, best_value(), ev.active))

    best_x = state.gbest_x if algo == "pso" else state.x[int(np.argmin(state.f))]
    ev.finalize(best_x)
    trace.profiles = profiler.finish()
    trace.archive = ev.archive
    return trace


def expected_true_evaluations(trace: RunTrace, cfg: RunConfig) -> int:
    """Closed-form true-evaluation count implied by the strategy definition."""
    if cfg.strategy == "none":
        return cfg.max_fe
    base = min(cfg.n_t, cfg.max_fe)
    if trace.surrogate_evaluations == 0:
        return base
    reevals = sum(r for _, r, _ in trace.reevaluation_log)
    return base + reevals + 1
