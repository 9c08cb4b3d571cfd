import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from saea.traffic import IntersectionSpec, Link, PhaseSpec, TrafficInstance, VehicleRoute


@pytest.fixture(autouse=True)
def _proxy_energy(monkeypatch):
    monkeypatch.setenv("SAEA_PROXY_ENERGY", "1")


def micro_instance(t_s: int = 8) -> TrafficInstance:
    """Two intersections, three vehicles; hand-traced in test_traffic."""
    two_phase = IntersectionSpec((PhaseSpec(1, 1, 0b01), PhaseSpec(1, 1, 0b10)))
    return TrafficInstance(
        intersections=(two_phase, two_phase),
        links=(
            Link(capacity=2, intersection=0, movement=0),
            Link(capacity=2, intersection=0, movement=1),
            Link(capacity=1, intersection=1, movement=0),
            Link(capacity=2),
        ),
        vehicles=(
            VehicleRoute((0, 2, 3), 0),
            VehicleRoute((1, 2, 3), 0),
            VehicleRoute((0, 3), 1),
        ),
        simulation_time=t_s,
        duration_bounds=(1, 5),
        name="micro",
    )


MICRO_SOLUTION = (2, 1, 1, 2)


@pytest.fixture
def micro():
    return micro_instance()


# acceptance criteria lines, printed after the run regardless of capture
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
