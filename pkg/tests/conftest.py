import numpy as np
import pytest

from bochner_galerkin.function_space import dirichlet_sine, divfree_fourier_2d, interval, torus2d

ACCEPTANCE_RESULTS = {}


@pytest.fixture(scope="session")
def sine16():
    return dirichlet_sine(interval(1.0, 16), 16)


@pytest.fixture(scope="session")
def sine8():
    return dirichlet_sine(interval(1.0, 8), 8)


@pytest.fixture(scope="session")
def divfree12():
    return divfree_fourier_2d(torus2d(), 12)


@pytest.fixture
def record_acceptance():
    def record(number, passed, detail):
        ACCEPTANCE_RESULTS[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")

