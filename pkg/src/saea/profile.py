"""Component-scoped energy, time and peak-allocation measurement.

Energy comes from the Linux powercap RAPL counters when they are readable.
Otherwise a proxy is used: wall time multiplied by configured wattages. The
two sources are never mixed within one report.

Measurement preconditions: RAPL counters are machine-wide, so attribution is
only meaningful on a quiet machine with single-threaded runs.
"""

from __future__ import annotations

import logging
import math
import os
import time
import tracemalloc
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

COMPONENTS = ("Evaluation", "Training", "Use", "Initialization", "Update")
POWERCAP_ROOT = Path("/sys/class/powercap")
PROXY_ENV = "SAEA_PROXY_ENERGY"
CSV_COLUMNS = ("component", "cpu_j", "dram_j", "total_j", "wall_s", "peak_alloc_b", "call_count", "source")


class MeasurementError(RuntimeError):
    pass


class BackendUnavailable(MeasurementError):
    """RAPL was required but cannot be read."""


@dataclass(frozen=True)
class EnergyReading:
    cpu_joules: float
    dram_joules: float | None  # None when the platform has no DRAM domain
    source: str

    @property
    def total_joules(self) -> float:
        return self.cpu_joules + (self.dram_joules or 0.0)


@dataclass(frozen=True)
class RaplDomain:
    name: str
    kind: str  # "cpu" or "dram"
    energy_file: Path
    max_range_uj: int


@dataclass(frozen=True)
class Counters:
    """Raw snapshot: microjoules per domain plus a monotonic timestamp."""

    values: dict
    timestamp: float


def counter_delta(c1: int, c2: int, max_range: int) -> int:
    """Difference of two cumulative readings, correcting a single wraparound."""
    if c2 >= c1:
        return c2 - c1
    return max_range - c1 + c2


def discover_rapl(root: Path = POWERCAP_ROOT) -> list[RaplDomain]:
    domains = []
    if not root.is_dir():
        return domains
    for zone in sorted(root.glob("intel-rapl:*")):
        try:
            name = (zone / "name").read_text().strip()
            max_range = int((zone / "max_energy_range_uj").read_text())
        except (OSError, ValueError):
            continue
        if name.startswith("package"):
            kind = "cpu"
        elif name == "dram":
            kind = "dram"
        else:
            continue  # core/uncore are inside the package total
        domains.append(RaplDomain(zone.name, kind, zone / "energy_uj", max_range))
    return domains


class EnergyMeter:
    """Reads RAPL counters or, failing that, the wattage proxy.

    ``force_proxy=None`` consults the ``SAEA_PROXY_ENERGY`` environment
    variable. ``allow_proxy=False`` turns a missing backend into
    :class:`BackendUnavailable` instead of a silent fallback.
    """

    def __init__(
        self,
        force_proxy: bool | None = None,
        cpu_watts: float = 50.0,
        dram_watts: float = 5.0,
        allow_proxy: bool = True,
        root: Path = POWERCAP_ROOT,
    ):
        if force_proxy is None:
            force_proxy = os.environ.get(PROXY_ENV, "").lower() in ("1", "true", "yes")
        if cpu_watts < 0 or dram_watts < 0:
            raise ValueError("wattages must be nonnegative")
        self.cpu_watts = float(cpu_watts)
        self.dram_watts = float(dram_watts)
        self.domains: list[RaplDomain] = []
        self.source = "proxy"
        if not force_proxy:
            domains = discover_rapl(Path(root))
            try:
                for d in domains:
                    int(d.energy_file.read_text())
            except PermissionError:
                log.warning("RAPL counters not readable; using proxy energy")
                domains = []
            except (OSError, ValueError):
                domains = []
            if any(d.kind == "cpu" for d in domains):
                self.domains = domains
                self.source = "rapl"
        if self.source == "proxy" and not force_proxy and not allow_proxy:
            raise BackendUnavailable("no readable RAPL package domain under " + str(root))

    @property
    def has_dram(self) -> bool:
        return self.source == "proxy" or any(d.kind == "dram" for d in self.domains)

    def read(self) -> Counters:
        now = time.perf_counter()
        if self.source == "proxy":
            return Counters({}, now)
        values = {}
        for d in self.domains:
            try:
                values[d.name] = int(d.energy_file.read_text())
            except PermissionError as exc:
                raise MeasurementError(f"lost access to {d.energy_file}") from exc
        return Counters(values, now)

    def between(self, c0: Counters, c1: Counters) -> tuple[float, float, float | None]:
        """Return (wall seconds, cpu joules, dram joules or None)."""
        wall = c1.timestamp - c0.timestamp
        if self.source == "proxy":
            return wall, wall * self.cpu_watts, wall * self.dram_watts
        cpu = 0
        dram = 0
        for d in self.domains:
            uj = counter_delta(c0.values[d.name], c1.values[d.name], d.max_range_uj)
            if d.kind == "cpu":
                cpu += uj
            else:
                dram += uj
        return wall, cpu * 1e-6, (dram * 1e-6 if self.has_dram else None)


def read_energy(meter: EnergyMeter | None = None) -> Counters:
    return (meter or EnergyMeter()).read()


@dataclass
class ComponentProfile:
    component: str
    cpu_joules: float = 0.0
    dram_joules: float | None = 0.0
    wall_seconds: float = 0.0
    peak_alloc_bytes: int = 0
    call_count: int = 0
    source: str = "proxy"

    @property
    def total_joules(self) -> float:
        return self.cpu_joules + (self.dram_joules or 0.0)

    def as_row(self) -> dict:
        return {
            "component": self.component,
            "cpu_j": self.cpu_joules,
            "dram_j": "" if self.dram_joules is None else self.dram_joules,
            "total_j": self.total_joules,
            "wall_s": self.wall_seconds,
            "peak_alloc_b": self.peak_alloc_bytes,
            "call_count": self.call_count,
            "source": self.source,
        }


@dataclass
class _Scope:
    component: str
    calls: int
    start: Counters
    mem_base: int
    wall: float = 0.0
    cpu: float = 0.0
    dram: float | None = 0.0
    peak: int = 0


class Profiler:
    """Accumulates exclusive per-component measurements for one run.

    Scopes for different components may nest; the outer scope is paused
    while an inner one is open, so every second and joule is charged to
    exactly one component. Re-entering an open component is an error.
    """

    def __init__(self, meter: EnergyMeter | None = None, track_memory: bool = True):
        self.meter = meter or EnergyMeter()
        self.track_memory = track_memory
        self.totals = {c: ComponentProfile(c, source=self.meter.source) for c in COMPONENTS}
        if not self.meter.has_dram:
            for p in self.totals.values():
                p.dram_joules = None
        self._stack: list[_Scope] = []
        self._started_tracing = False
        self._running_joules = 0.0

    # -- memory helpers
    def _mem_start(self) -> int:
        if not self.track_memory:
            return 0
        if not tracemalloc.is_tracing():
            tracemalloc.start()
            self._started_tracing = True
        current, _ = tracemalloc.get_traced_memory()
        tracemalloc.reset_peak()
        return current

    def _mem_peak(self, base: int) -> int:
        if not self.track_memory:
            return 0
        _, peak = tracemalloc.get_traced_memory()
        return max(0, peak - base)

    def _accumulate(self, scope: _Scope, now: Counters) -> None:
        wall, cpu, dram = self.meter.between(scope.start, now)
        scope.wall += wall
        scope.cpu += cpu
        if dram is None or scope.dram is None:
            scope.dram = None
        else:
            scope.dram += dram
        scope.peak = max(scope.peak, self._mem_peak(scope.mem_base))

    def open(self, component: str, calls: int = 1) -> _Scope:
        if component not in self.totals:
            raise ValueError(f"unknown component {component!r}; expected one of {COMPONENTS}")
        if any(s.component == component for s in self._stack):
            raise MeasurementError(f"scope {component!r} is already open")
        now = self.meter.read()
        if self._stack:
            self._accumulate(self._stack[-1], now)
        scope = _Scope(component, calls, self.meter.read(), 0)
        scope.mem_base = self._mem_start()
        self._stack.append(scope)
        return scope

    def close(self, scope: _Scope) -> ComponentProfile:
        if not self._stack or self._stack[-1] is not scope:
            raise MeasurementError("scopes must be closed in LIFO order")
        now = self.meter.read()
        self._accumulate(scope, now)
        self._stack.pop()
        total = self.totals[scope.component]
        total.wall_seconds += scope.wall
        total.cpu_joules += scope.cpu
        if total.dram_joules is not None and scope.dram is not None:
            total.dram_joules += scope.dram
        total.peak_alloc_bytes = max(total.peak_alloc_bytes, scope.peak)
        total.call_count += scope.calls
        self._running_joules += scope.cpu + (scope.dram or 0.0)
        if self._stack:
            outer = self._stack[-1]
            outer.start = self.meter.read()
            # allocations still held by the inner scope stay charged to the outer base
            self._mem_start()
        return ComponentProfile(
            scope.component, scope.cpu, scope.dram, scope.wall, scope.peak, scope.calls, self.meter.source
        )

    @contextmanager
    def measure(self, component: str, calls: int = 1):
        """Context manager charging its body to ``component``.

        Yields a dict which receives the finished :class:`ComponentProfile`
        under ``"profile"`` once the body exits.
        """
        scope = self.open(component, calls)
        result: dict = {}
        try:
            yield result
        finally:
            result["profile"] = self.close(scope)

    @property
    def cumulative_joules(self) -> float:
        return self._running_joules

    def finish(self) -> dict[str, ComponentProfile]:
        """End the run; unclosed scopes are a hard error."""
        if self._stack:
            names = [s.component for s in self._stack]
            self._stack.clear()
            raise MeasurementError(f"unclosed profiling scopes at run end: {names}")
        if self._started_tracing:
            tracemalloc.stop()
            self._started_tracing = False
        return {c: replace(p) for c, p in self.totals.items()}


def measure(profiler: Profiler, component: str, body, *args, **kwargs):
    """Run ``body(*args, **kwargs)`` inside a scope; return (result, profile)."""
    with profiler.measure(component) as m:
        out = body(*args, **kwargs)
    return out, m["profile"]


def total_profile(profiles: dict[str, ComponentProfile]) -> ComponentProfile:
    parts = [profiles[c] for c in COMPONENTS if c in profiles]
    dram = None if any(p.dram_joules is None for p in parts) else math.fsum(p.dram_joules for p in parts)
    sources = {p.source for p in parts}
    if len(sources) > 1:
        raise MeasurementError(f"mixed energy sources in one run: {sorted(sources)}")
    return ComponentProfile(
        "Total",
        cpu_joules=math.fsum(p.cpu_joules for p in parts),
        dram_joules=dram,
        wall_seconds=math.fsum(p.wall_seconds for p in parts),
        # memory peaks do not add; the run peak is the largest scope peak
        peak_alloc_bytes=max((p.peak_alloc_bytes for p in parts), default=0),
        call_count=sum(p.call_count for p in parts),
        source=sources.pop() if sources else "proxy",
    )


MEASURES = ("cpu_j", "dram_j", "total_j", "wall_s", "peak_alloc_b")


def report(runs: list[dict[str, ComponentProfile]]) -> list[dict]:
    """Mean and standard deviation per component and measure across runs.

    Returns rows ``{component, measure, mean, std, n}``. Components never
    entered in any run (zero calls) are reported as ``NA``; the ``Total``
    component is the per-run sum of the five components.
    """
    if not runs:
        raise ValueError("no runs to report")
    sources = {p.source for run in runs for p in run.values()}
    if len(sources) > 1:
        raise MeasurementError(f"refusing to aggregate mixed energy sources {sorted(sources)}")
    rows = []
    per_run = [dict(run, Total=total_profile(run)) for run in runs]
    for comp in COMPONENTS + ("Total",):
        present = any(run[comp].call_count > 0 for run in per_run) or comp == "Total"
        for measure in MEASURES:
            if not present:
                rows.append({"component": comp, "measure": measure, "mean": "NA", "std": "NA", "n": len(runs)})
                continue
            vals = [run[comp].as_row()[measure] for run in per_run]
            if any(v == "" for v in vals):
                rows.append({"component": comp, "measure": measure, "mean": "NA", "std": "NA", "n": len(runs)})
                continue
            arr = np.asarray(vals, dtype=float)
            std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
            rows.append({"component": comp, "measure": measure, "mean": float(arr.mean()), "std": std, "n": len(runs)})
    return rows
