import math

import numpy as np
import pytest
from hypothesis import settings

from prospect.cli import generate_instance
from prospect.instance import Instance, Point3
from prospect.travel import UniformEdgeModel

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def model():
    return UniformEdgeModel()


def corpus_instance(n: int, seed: int, risk: float = 0.1) -> Instance:
    """Default-parameter random instance (4 km box, 100 m altitude, 600 s budget)."""
    return generate_instance(n, seed, 0, risk=risk)


def line_instance(xs, z=100.0, risk=0.1, budget=600.0, final=(1000.0, 0.0, 0.0)) -> Instance:
    pts = tuple(Point3(float(x), 0.0, z) for x in xs)
    return Instance((4000.0, 4000.0, 200.0), pts, Point3(0, 0, 0), Point3(*final), budget, risk)


def finite(x: float) -> bool:
    return math.isfinite(x)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
