import json

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from folmi.cli import bundled
from folmi.interval import DelaySpec, FoSystem, IntervalMatrix
from folmi.schema import load

# derandomized: every property run draws the same cases
settings.register_profile(
    "folmi",
    max_examples=100,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("folmi")

A_LO = [[-2.3333, 1.0], [-1.6667, 0.0]]
A_UP = [[-1.0, 1.0], [-0.6, 0.0]]
B_LO = [[0.52], [0.56]]
B_UP = [[1.1333], [1.0667]]
C_OUT = [[1.0, 0.0]]


@pytest.fixture(scope="session")
def ex2_system():
    return FoSystem(
        0.3,
        IntervalMatrix(np.array(A_LO), np.array(A_UP)),
        IntervalMatrix(np.array(B_LO), np.array(B_UP)),
        np.array(C_OUT),
        DelaySpec(0.25, 0.15, "sin_exp", a=0.15),
    )


@pytest.fixture(scope="session")
def ex1_plant_a():
    return IntervalMatrix(np.array(A_LO), np.array(A_UP))


@pytest.fixture(scope="session")
def docs():
    names = [
        "ex1_closed_loop",
        "ex1_plant",
        "ex1_plant_negfb",
        "ex2_plant",
        "ex2_static_table",
    ]
    return {n: load(bundled(n + ".json")) for n in names}


@pytest.fixture(scope="session")
def reference_certificate():
    with open(bundled("ex1_reference_certificate.json"), encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def ex2_static_result(ex2_system):
    from folmi.synthesis import synthesize

    return synthesize(ex2_system, 0)


# acceptance lines, one per criterion, echoed in the terminal summary
ACCEPTANCE = {}


@pytest.fixture
def criterion():
    def record(key, ok, detail):
        line = f"[{key}] {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE[key] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
