"""Traffic-light scheduling problem: instances, a queue microsimulator and the
scalar objective that the optimizers minimize.

The simulator is a deterministic discrete-time queue model. Every link holds a
FIFO queue with finite capacity and a unit traversal time; a link may be
governed by one signal movement of one intersection, in which case its head
vehicle can only leave while the active phase of that intersection permits
the movement.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import networkx as nx
import numpy as np

FORMAT_VERSION = 1
DEFAULT_BOUNDS = (5, 60)

# approach directions at a grid intersection; movement index == approach index
_DIRS = ("N", "E", "S", "W")
_N_MOVEMENTS = len(_DIRS)


@dataclass(frozen=True)
class PhaseSpec:
    green_count: int
    red_count: int
    movement_mask: int

    def __post_init__(self):
        if self.green_count < 0 or self.red_count < 0:
            raise ValueError("signal counts must be nonnegative")
        if self.green_count + self.red_count < 1:
            raise ValueError("a phase needs at least one signal")
        if self.green_count != bin(self.movement_mask).count("1"):
            raise ValueError(
                f"green_count={self.green_count} does not match popcount of "
                f"movement_mask={self.movement_mask:#b}"
            )

    def permits(self, movement: int) -> bool:
        return bool((self.movement_mask >> movement) & 1)


@dataclass(frozen=True)
class IntersectionSpec:
    phases: tuple[PhaseSpec, ...]

    def __post_init__(self):
        if len(self.phases) == 0:
            raise ValueError("an intersection needs at least one phase")


@dataclass(frozen=True)
class Link:
    """Directed road segment. ``intersection is None`` means ungoverned."""

    capacity: int = 8
    intersection: int | None = None
    movement: int = 0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("link capacity must be >= 1")


@dataclass(frozen=True)
class VehicleRoute:
    route: tuple[int, ...]
    departure_tick: int = 0

    def __post_init__(self):
        if len(self.route) == 0:
            raise ValueError("vehicle route must be nonempty")
        if self.departure_tick < 0:
            raise ValueError("departure_tick must be >= 0")


@dataclass(frozen=True)
class TrafficInstance:
    intersections: tuple[IntersectionSpec, ...]
    links: tuple[Link, ...]
    vehicles: tuple[VehicleRoute, ...]
    simulation_time: int
    duration_bounds: tuple[int, int] = DEFAULT_BOUNDS
    name: str = "instance"
    # flat index -> (g, r); filled in __post_init__
    _ratios: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.intersections) == 0:
            raise ValueError("instance needs at least one intersection")
        if self.simulation_time <= 0:
            raise ValueError("simulation_time must be > 0")
        lo, hi = self.duration_bounds
        if lo < 1 or lo > hi:
            raise ValueError(f"invalid duration_bounds {self.duration_bounds}")
        n_links = len(self.links)
        for k, link in enumerate(self.links):
            if link.intersection is None:
                continue
            if not 0 <= link.intersection < len(self.intersections):
                raise ValueError(f"link {k} refers to unknown intersection {link.intersection}")
            if link.movement < 0:
                raise ValueError(f"link {k} has negative movement index")
        for v, veh in enumerate(self.vehicles):
            for lk in veh.route:
                if not 0 <= lk < n_links:
                    raise ValueError(f"vehicle {v} route uses unknown link {lk}")
        ratios = [
            ph.green_count / max(ph.red_count, 1)
            for inter in self.intersections
            for ph in inter.phases
        ]
        object.__setattr__(self, "_ratios", np.asarray(ratios, dtype=float))

    @property
    def dimension(self) -> int:
        return sum(len(i.phases) for i in self.intersections)

    @property
    def n_vehicles(self) -> int:
        return len(self.vehicles)

    @property
    def lower(self) -> int:
        return self.duration_bounds[0]

    @property
    def upper(self) -> int:
        return self.duration_bounds[1]

    def check_solution(self, s: Sequence[int]) -> np.ndarray:
        x = np.asarray(s)
        if x.ndim != 1 or x.shape[0] != self.dimension:
            raise ValueError(
                f"solution has shape {x.shape}, expected ({self.dimension},)"
            )
        if not np.issubdtype(x.dtype, np.integer):
            if not np.all(np.equal(np.mod(x, 1), 0)):
                raise ValueError("phase durations must be integers")
            x = x.astype(np.int64)
        if x.min() < self.lower or x.max() > self.upper:
            raise ValueError(
                f"phase durations must lie in {self.duration_bounds}"
            )
        return x


@dataclass(frozen=True)
class SimulationOutcome:
    total_travel_time: int
    total_waiting_time: int
    arrived: int
    not_arrived: int


def phase_ratio(instance: TrafficInstance, s: Sequence[int]) -> float:
    """Sum of duration-weighted green/red ratios (red count clamped to 1)."""
    x = instance.check_solution(s)
    return float(np.dot(x, instance._ratios))


def _phase_schedule(instance: TrafficInstance, x: np.ndarray) -> list[tuple[list[int], int]]:
    """Per intersection: active movement mask for each second of the cycle."""
    out = []
    pos = 0
    for inter in instance.intersections:
        by_second: list[int] = []
        for ph in inter.phases:
            by_second.extend([ph.movement_mask] * int(x[pos]))
            pos += 1
        out.append((by_second, len(by_second)))
    return out


def simulate(instance: TrafficInstance, s: Sequence[int]) -> SimulationOutcome:
    """Run the queue microsimulation for ``simulation_time`` ticks.

    Each tick proceeds in two stages. First, vehicles whose departure tick has
    come are inserted, in vehicle order, at the tail of their first link if it
    has room; otherwise they wait at the origin. Second, the head vehicle of
    every nonempty link tries to move: it needs a green movement (ungoverned
    links are always open) and, unless it is on its last link, room on the
    next link measured against start-of-stage occupancy plus vehicles already
    admitted this tick. Heads are processed in vehicle order. A vehicle leaving
    its last link arrives; its elapsed ticks since departure go to travel time.
    Every released vehicle that does not move in a tick adds one waiting tick.
    """
    x = instance.check_solution(s)
    schedule = _phase_schedule(instance, x)
    links = instance.links
    vehicles = instance.vehicles
    t_s = instance.simulation_time

    n_links = len(links)
    queues: list[list[int]] = [[] for _ in range(n_links)]
    position = [-1] * len(vehicles)  # index into route; -1 not yet on the network
    order = sorted(range(len(vehicles)), key=lambda v: (vehicles[v].departure_tick, v))
    next_release = 0
    pending: list[int] = []  # released but blocked at the origin, vehicle order
    travel = 0
    waiting = 0
    arrived = 0
    on_network = 0

    governed = [lk.intersection is not None for lk in links]

    for tick in range(t_s):
        while next_release < len(order) and vehicles[order[next_release]].departure_tick <= tick:
            pending.append(order[next_release])
            next_release += 1
        if pending:
            pending.sort()
            still = []
            for v in pending:
                first = vehicles[v].route[0]
                if len(queues[first]) < links[first].capacity:
                    queues[first].append(v)
                    position[v] = 0
                    on_network += 1
                else:
                    still.append(v)
            pending = still

        if on_network:
            masks = [by_second[tick % cycle] for by_second, cycle in schedule]
            heads = sorted(q[0] for q in queues if q)
            occupancy = [len(q) for q in queues]
            admitted = [0] * n_links
            n_on = on_network
            moved = 0
            for v in heads:
                route = vehicles[v].route
                k = position[v]
                cur = route[k]
                link = links[cur]
                if governed[cur] and not (masks[link.intersection] >> link.movement) & 1:
                    continue
                if k == len(route) - 1:
                    queues[cur].pop(0)
                    position[v] = len(route)
                    travel += tick + 1 - vehicles[v].departure_tick
                    arrived += 1
                    on_network -= 1
                    moved += 1
                    continue
                nxt = route[k + 1]
                if occupancy[nxt] + admitted[nxt] >= links[nxt].capacity:
                    continue
                queues[cur].pop(0)
                queues[nxt].append(v)
                admitted[nxt] += 1
                position[v] = k + 1
                moved += 1
            waiting += n_on - moved
        waiting += len(pending)

    return SimulationOutcome(
        total_travel_time=int(travel),
        total_waiting_time=int(waiting),
        arrived=int(arrived),
        not_arrived=int(len(vehicles) - arrived),
    )



def objective_from_outcome(out: SimulationOutcome, simulation_time: int, ratio: float) -> float:
    denom = out.arrived ** 2 + ratio
    if denom == 0:
        return math.inf
    num = out.total_travel_time + out.total_waiting_time + out.not_arrived * simulation_time
    return num / denom


def objective(instance: TrafficInstance, s: Sequence[int]) -> float:
    """Scalarized cost F; smaller is better."""
    out = simulate(instance, s)
    return objective_from_outcome(out, instance.simulation_time, phase_ratio(instance, s))


def random_solution(instance: TrafficInstance, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(instance.lower, instance.upper + 1, size=instance.dimension)


# ---------------------------------------------------------------------------
# synthetic instances

def _grid_phases(rng: np.random.Generator, n_phases: int) -> tuple[PhaseSpec, ...]:
    # partition the four approaches into n_phases nonempty groups
    if n_phases == 2:
        groups = [[0, 2], [1, 3]]
    elif n_phases == 3:
        split = [[0, 2], [1], [3]] if rng.random() < 0.5 else [[1, 3], [0], [2]]
        groups = split
    else:
        groups = [[d] for d in rng.permutation(_N_MOVEMENTS).tolist()]
    phases = []
    for g in groups:
        mask = 0
        for d in g:
            mask |= 1 << d
        phases.append(PhaseSpec(len(g), _N_MOVEMENTS - len(g), mask))
    return tuple(phases)


def generate_instance(
    seed: int,
    grid: tuple[int, int] = (2, 2),
    n_vehicles: int = 60,
    t_s: int = 400,
    *,
    phases: int | None = None,
    capacity: int = 6,
    duration_bounds: tuple[int, int] = DEFAULT_BOUNDS,
    name: str | None = None,
) -> TrafficInstance:
    """Build a seeded rows x cols grid network with shortest-path traffic.

    Every intersection is fed by four approach links (N, E, S, W), each
    governed by the matching movement. Border approaches start at boundary
    terminals, which also act as exits over ungoverned links. Intersections
    get 2-4 phases unless ``phases`` pins the count. Vehicles travel between
    two distinct random terminals on a shortest path; departure ticks are
    drawn uniformly in the first half of the horizon.
    """
    rows, cols = grid
    if rows < 1 or cols < 1:
        raise ValueError("grid must have at least one intersection")
    if n_vehicles < 0:
        raise ValueError("n_vehicles must be >= 0")
    if phases is not None and not 2 <= phases <= 4:
        raise ValueError("phases per intersection must be 2, 3 or 4")
    rng = np.random.default_rng(seed)

    def inter_id(r, c):
        return r * cols + c

    intersections = []
    for _ in range(rows * cols):
        n_ph = phases if phases is not None else int(rng.integers(2, 5))
        intersections.append(IntersectionSpec(_grid_phases(rng, n_ph)))

    # node keys: ("i", r, c) for intersections, ("t", r, c) for terminals
    # outside the grid; direction offsets give the approach side
    offsets = {"N": (-1, 0), "E": (0, 1), "S": (1, 0), "W": (0, -1)}
    g = nx.DiGraph()
    links: list[Link] = []
    terminals: list[tuple] = []

    def add_link(u, v, link):
        g.add_edge(u, v, link=len(links))
        links.append(link)

    for r in range(rows):
        for c in range(cols):
            here = ("i", r, c)
            for m, d in enumerate(_DIRS):
                dr, dc = offsets[d]
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols:
                    src = ("i", rr, cc)
                else:
                    src = ("t", rr, cc)
                    terminals.append(src)
                    # exit link from the intersection to the terminal
                    add_link(here, src, Link(capacity=capacity))
                # approach from side d enters via movement m
                add_link(src, here, Link(capacity=capacity, intersection=inter_id(r, c), movement=m))

    vehicles = []
    if n_vehicles:
        departures = np.sort(rng.integers(0, max(t_s // 2, 1), size=n_vehicles))
        for k in range(n_vehicles):
            o, dst = rng.choice(len(terminals), size=2, replace=False)
            path = nx.shortest_path(g, terminals[o], terminals[dst])
            route = tuple(g.edges[u, v]["link"] for u, v in zip(path[:-1], path[1:]))
            vehicles.append(VehicleRoute(route, int(departures[k])))

    return TrafficInstance(
        intersections=tuple(intersections),
        links=tuple(links),
        vehicles=tuple(vehicles),
        simulation_time=int(t_s),
        duration_bounds=tuple(duration_bounds),
        name=name or f"grid{rows}x{cols}-s{seed}",
    )


# ---------------------------------------------------------------------------
# files

def instance_to_dict(instance: TrafficInstance) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "name": instance.name,
        "simulation_time": instance.simulation_time,
        "duration_bounds": list(instance.duration_bounds),
        "intersections": [
            {"phases": [
                {"green_count": p.green_count, "red_count": p.red_count,
                 "movement_mask": p.movement_mask}
                for p in inter.phases
            ]}
            for inter in instance.intersections
        ],
        "links": [
            {"capacity": lk.capacity, "intersection": lk.intersection, "movement": lk.movement}
            for lk in instance.links
        ],
        "vehicles": [
            {"route": list(v.route), "departure_tick": v.departure_tick}
            for v in instance.vehicles
        ],
    }


def instance_from_dict(data: dict) -> TrafficInstance:
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported instance format_version {version!r}")
    return TrafficInstance(
        intersections=tuple(
            IntersectionSpec(tuple(PhaseSpec(**p) for p in inter["phases"]))
            for inter in data["intersections"]
        ),
        links=tuple(Link(**lk) for lk in data["links"]),
        vehicles=tuple(
            VehicleRoute(tuple(v["route"]), int(v.get("departure_tick", 0)))
            for v in data["vehicles"]
        ),
        simulation_time=int(data["simulation_time"]),
        duration_bounds=tuple(data.get("duration_bounds", DEFAULT_BOUNDS)),
        name=data.get("name", "instance"),
    )


def save_instance(instance: TrafficInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1))


def load_instance(path) -> TrafficInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def save_solution(s: Sequence[int], path) -> None:
    lines = [f"format_version: {FORMAT_VERSION}"] + [str(int(v)) for v in s]
    Path(path).write_text("\n".join(lines) + "\n")


def load_solution(path) -> np.ndarray:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("format_version:"):
        raise ValueError("solution file must start with a format_version line")
    version = int(lines[0].split(":", 1)[1])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported solution format_version {version}")
    return np.array([int(v) for v in lines[1:]], dtype=np.int64)
